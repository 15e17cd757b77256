"""
Helpers shared by the command modules
"""
import argparse
import logging
import os
import time
from typing import Iterable, List, Optional

from models.dataset import Dataset
from models.errors import ConfigurationError
from utils.files import RunManifest, load_dataset, save_dataset, save_model

logger = logging.getLogger(__name__)


def common_parser() -> argparse.ArgumentParser:
    """Flags every subcommand accepts"""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', help='Hyperparameter configuration file (JSON)')
    parser.add_argument('--log-level', help='Logging level (overrides LOG_LEVEL)')
    return parser


def parse_grid(text: Optional[str], default: Iterable[float]) -> List[float]:
    """Comma-separated numbers, or the default grid when no flag was given"""
    if text is None:
        return [float(v) for v in default]
    try:
        return [float(token) for token in text.split(',') if token.strip()]
    except ValueError:
        raise ConfigurationError(f"Invalid numeric grid {text!r}")


def validate_grid(text: Optional[str], name: str, positive: bool = True) -> List[str]:
    errors = []
    if text is None:
        return errors
    try:
        values = parse_grid(text, [])
    except ConfigurationError:
        return [f'{name} must be a comma-separated list of numbers']
    if not values:
        errors.append(f'{name} grid is empty')
    elif positive and any(v <= 0 for v in values):
        errors.append(f'{name} values must be greater than 0')
    return errors


def validate_inputs(paths: Iterable[Optional[str]]) -> List[str]:
    return [f'Input file not found: {path}' for path in paths if path and not os.path.exists(path)]


def validate_output(path: Optional[str]) -> List[str]:
    if not path:
        return ['Output path (-o) is required']
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        return [f'Output directory does not exist: {directory}']
    return []


def new_manifest(command: str, args: argparse.Namespace, **hyperparameters) -> RunManifest:
    inputs = {name: getattr(args, name) for name in ('model', 'input', 'tune', 'schema')
              if getattr(args, name, None)}
    return RunManifest(command=command, inputs=inputs, hyperparameters=hyperparameters,
                       seed=getattr(args, 'seed', 0) or 0, output=getattr(args, 'output', None))


def finish(manifest: RunManifest, started: float, model=None, data=None) -> RunManifest:
    """Write the output, then its manifest; timing covers the model write"""
    if model is not None:
        save_model(manifest.output, model)
    if data is not None:
        save_dataset(manifest.output, data)
    manifest.duration_seconds = time.perf_counter() - started
    if manifest.manifest_path:
        manifest.save_to_file(manifest.manifest_path)
    logger.info(f"Run manifest: {manifest.to_json()}")
    return manifest


def load_dataset_for(path: str, model) -> Dataset:
    """Load data and read it under the model's schema

    Arities inferred from a data file can fall short of the model's when a
    value never occurs, so the model schema is authoritative.
    """
    data = load_dataset(path)
    if len(data.schema) != len(model.schema):
        raise ConfigurationError(
            f"Data in {path} has {len(data.schema)} variables, the model has {len(model.schema)}"
        )
    if data.schema == model.schema:
        return data
    return Dataset(model.schema, data.rows)
