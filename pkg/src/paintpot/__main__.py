"""``python -m paintpot`` entry point."""

from paintpot.cli import console_main

if __name__ == "__main__":
    console_main()
