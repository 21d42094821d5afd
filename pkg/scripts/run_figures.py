"""Write every figure table for the default parameters into runs/figures."""

import sys

from mbcool.cli import main

if __name__ == "__main__":
    sys.exit(main(["figures", "--out", "runs/figures", "--sweep-workers", "4", *sys.argv[1:]]))
