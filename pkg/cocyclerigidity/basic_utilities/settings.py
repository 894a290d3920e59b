from pathlib import Path

from loguru import logger

from cocyclerigidity.configuration.constants import Command


def get_output_directory_path(out_dir: str | Path | None) -> Path:
    '''Returns the artifact directory, creating it if it does not exist'''
    path = Path.cwd() / "results" if out_dir is None else Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def artifact_path(out_dir: Path, command: Command, suffix: str) -> Path:
    '''<out_dir>/<command>.<suffix>, e.g. results/shadow.csv'''
    path = out_dir / f"{command.value}.{suffix}"
    logger.debug(f"Writing {path}")
    return path
