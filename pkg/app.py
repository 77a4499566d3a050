"""Crest command-line entry point: python app.py <command> [flags]."""
import sys

from dotenv import load_dotenv

from src.cli_logic import main

load_dotenv()

if __name__ == "__main__":
    sys.exit(main())
