import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from wavespec import WaveSpec
from wavespec.backends.filesystem import FileBackend
from wavespec.backends.inmemory import InMemoryBackend
from wavespec.coder import JsonCoder
from wavespec.config import TASKS, RunConfig
from wavespec.errors import AcceptanceError, ConfigError, WaveSpecError
from wavespec.pipeline import run_task
from wavespec.types import Backend

logger: logging.Logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavespec",
        description="Travelling waves, spectra and stability of quasilinear reaction-diffusion systems.",
    )
    parser.add_argument("config", nargs="?", help="TOML run configuration")
    parser.add_argument("--task", choices=TASKS, help="override the configured task")
    parser.add_argument("--output", help="override output.directory")
    parser.add_argument("--threads", type=int, help="override the thread count")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_toml(args.config) if args.config else RunConfig()
    updates: Dict[str, Any] = {}
    if args.task:
        updates["task"] = args.task
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.output:
        updates["output"] = {**config.output.model_dump(), "directory": args.output}
    if not updates:
        return config
    return RunConfig.from_mapping({**config.model_dump(), **updates})


def _numerical_failure(
    directory: Path, error: Exception, details: Dict[str, Any]
) -> int:
    logger.error(f"{type(error).__name__}: {error}")
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "error.json").write_bytes(JsonCoder.encode(details))
    return EXIT_NUMERICAL


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG

    directory = Path(config.output.directory)
    backend: Backend = (
        FileBackend(config.output.cache_dir)
        if config.output.cache_dir
        else InMemoryBackend()
    )
    WaveSpec.init(backend=backend, threads=config.threads)
    try:
        run_task(config, directory)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except AcceptanceError as e:
        logger.error(str(e))
        return EXIT_ACCEPTANCE
    except WaveSpecError as e:
        return _numerical_failure(directory, e, e.details())
    except (ValueError, ArithmeticError) as e:
        logger.debug("unexpected numerical failure", exc_info=True)
        return _numerical_failure(
            directory, e, {"type": type(e).__name__, "message": str(e)}
        )
    finally:
        WaveSpec.reset()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
