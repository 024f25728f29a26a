"""Main entry point for the ice-sheet emulator workflow.

    python main.py generate  --config configs/helheim.json
    python main.py train     --config configs/helheim.json --model egcn,gcn,fcn
    python main.py evaluate  --config configs/helheim.json --model egcn,gcn,fcn
    python main.py benchmark --config configs/helheim.json --model egcn,gcn,fcn
"""

import sys

from cli.commands import main


if __name__ == "__main__":
    sys.exit(main())
