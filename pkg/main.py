import sys
from pathlib import Path

# Modules under src/ import each other by bare name
sys.path.append(str(Path(__file__).resolve().parent / "src"))

from cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
