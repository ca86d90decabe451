"""
Environment configuration for qfi-bell.
"""
import os

from dotenv import load_dotenv

from common.errors import ValidationError

load_dotenv()

DEBUG = os.getenv("DEBUG", "False").lower() == "true"

# Significant digits for every float written to CSV, JSON or reports
PRECISION = int(os.getenv("QFI_BELL_PRECISION", "12"))


def get_thread_count() -> int:
    """
    Read the worker-pool cap for parameter scans.

    Returns:
        Number of worker threads, QFI_BELL_THREADS or the CPU count

    Raises:
        ValidationError: If QFI_BELL_THREADS is not a positive integer
    """
    raw = os.getenv("QFI_BELL_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1

    try:
        threads = int(raw)
    except ValueError:
        raise ValidationError(f"QFI_BELL_THREADS must be an integer, got '{raw}'")

    if threads < 1:
        raise ValidationError(f"QFI_BELL_THREADS must be at least 1, got {threads}")

    return threads
