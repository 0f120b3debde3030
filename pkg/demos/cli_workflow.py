"""End-to-end command-line workflow in a scratch directory.

Writes a config, runs the simulation, inspects the outputs with the
``audit`` and ``report`` subcommands, and evaluates a Besov norm of the
final checkpoint -- the same flow as calling ``ehd ...`` from a shell.
"""

import pathlib
import tempfile

from ehd.cli import main

with tempfile.TemporaryDirectory() as scratch:
    scratch = pathlib.Path(scratch)
    config = scratch / "run.cfg"
    config.write_text(
        f"""# charged relaxation on a coarse grid
grid_n = 16
t_end = 0.05
initial_condition = charged_shear
criterion = BKM, inf, auto
criterion = PS_u, 6, auto
output_dir = {scratch}
"""
    )

    print("== ehd run ==")
    code = main(["run", str(config)])
    print(f"(exit code {code})\n")

    print("== ehd audit ==")
    main(["audit", str(scratch)])

    print("\n== ehd report ==")
    main(["report", str(scratch / "report.json")])

    print("\n== ehd besov (velocity magnitude of the final state) ==")
    main([
        "besov", str(scratch / "final.ehds"),
        "--s", "0", "--p", "inf", "--r", "inf",
    ])
