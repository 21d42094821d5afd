"""Final fidelity and success probability over (n_r, gamma), closed and open system."""

import sys

from mbcool.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            ["sweep", "--n-r-list", *map(str, range(5, 13)), "--gamma0-multiples", "0", "0.5", "1", "1.5",
             "--sweep-workers", "4", "--out", "runs/sweep", *sys.argv[1:]]
        )
    )
