"""Solve every MPS file in a directory with HiGHS and print the objectives.

    pip install highspy
    python3 scripts/check_mps_highs.py target/tmp/acceptance-mps
"""
import glob
import os
import sys

import highspy


def main(directory):
    for path in sorted(glob.glob(os.path.join(directory, "*.mps"))):
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("mip_rel_gap", 0.0)
        h.setOptionValue("mip_abs_gap", 0.0)
        h.readModel(path)
        h.run()
        status = h.modelStatusToString(h.getModelStatus())
        print(f"{os.path.basename(path)},{status},{h.getInfo().objective_function_value!r}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "target/tmp/acceptance-mps")
