import sys

from ordinal_qwk.cli import main  # абсолютный импорт


if __name__ == "__main__":
    sys.exit(main())
