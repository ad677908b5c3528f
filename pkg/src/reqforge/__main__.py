"""`python -m reqforge` delegates to the command line front."""
from reqforge.cli import main

if __name__ == "__main__":
    main()
