import os
import logging
import json
import hashlib
import math
import functools
from typing import Iterator, Optional, Sequence


def ensure_directory_exists(directory_path):
    """
    Create a directory if it doesn't exist.

    Parameters:
    -----------
    directory_path : str
        Path to the directory to check/create
    """
    if not os.path.exists(directory_path):
        os.makedirs(directory_path)
        logging.info(f"Created directory: {directory_path}")


def ensure_empty_directory(directory_path, force=False):
    """
    Make sure an output directory exists and holds nothing we would clobber.

    Parameters:
    -----------
    directory_path : str
        Output directory
    force : bool, optional
        Allow writing into a non-empty directory

    Raises:
    -------
    FileExistsError
        If the directory is non-empty and force is not set
    """
    if os.path.isdir(directory_path) and os.listdir(directory_path) and not force:
        raise FileExistsError(
            f"Output directory {directory_path} is not empty (use --force to overwrite)"
        )
    ensure_directory_exists(directory_path)


def get_file_hash(file_path):
    """
    Generate a SHA-256 hash for a file.

    Parameters:
    -----------
    file_path : str
        Path to the file

    Returns:
    --------
    str
        Hex digest of the file content
    """
    digest = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(4096), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_json(file_path):
    """
    Load data from a JSON file.

    Parameters:
    -----------
    file_path : str
        Path to the JSON file

    Returns:
    --------
    dict
        Loaded JSON data as a dictionary

    Raises:
    -------
    FileNotFoundError, json.JSONDecodeError
        Propagated after logging; callers wrap them in domain errors.
    """
    try:
        with open(file_path, 'r') as f:
            return json.load(f)
    except (json.JSONDecodeError, FileNotFoundError) as e:
        logging.error(f"Error loading JSON file {file_path}: {e}")
        raise


def save_json(data, file_path):
    """
    Save data to a JSON file with stable key order so reruns are byte-identical.

    Parameters:
    -----------
    data : dict
        Data to save
    file_path : str
        Path to the JSON file
    """
    with open(file_path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    logging.debug(f"Wrote {file_path}")


def chunker(seq: Sequence, size: int) -> Iterator[Sequence]:
    """
    Split a sequence into chunks of the specified size. The last chunk may be shorter.

    Parameters:
    -----------
    seq : sequence
        Sequence to split
    size : int
        Size of each chunk

    Returns:
    --------
    generator
        Generator yielding chunks of the sequence
    """
    return (seq[pos:pos + size] for pos in range(0, len(seq), size))


def handle_exceptions(func):
    """
    Decorator that logs an exception raised by the wrapped function and re-raises it.

    Args:
        func: The function to wrap with exception handling.

    Returns:
        Wrapped function with exception handling.
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Exception as e:
            logging.error(f"Exception in {func.__name__}: {e}", exc_info=True)
            raise
    return wrapper


def setup_logging(log_file: Optional[str] = None, level=logging.INFO):
    """
    Set up logging configuration.

    Args:
        log_file: Optional log file; the stream handler is always installed.
        level: Logging level (int or name).
    """
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    handlers = [logging.StreamHandler()]
    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def log10_floor(value: float, floor: float = -12.0) -> float:
    """
    log10 of a nonnegative loss, floored for reporting (log10(0) is -inf).

    Args:
        value: Loss value.
        floor: Reported value for zero or tiny losses.

    Returns:
        max(log10(value), floor)
    """
    if value <= 0.0:
        return floor
    if not math.isfinite(value):
        return float(value)
    return max(math.log10(value), floor)


