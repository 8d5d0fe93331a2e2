import json
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np

from holehom.corrector import CorrectorBundle
from holehom.field import CoefficientField, GridField
from holehom.geometry import InclusionSet

logger = logging.getLogger(__name__)


def save_inclusions(inclusion_set: InclusionSet, path: Union[str, Path]):
    Path(path).write_text(json.dumps(inclusion_set.to_document(), indent=2) + "\n", encoding="utf-8")


def load_inclusions(path: Union[str, Path]) -> InclusionSet:
    return InclusionSet.from_document(json.loads(Path(path).read_text(encoding="utf-8")))


def dump_field(directory: Union[str, Path], name: str, field: Union[GridField, np.ndarray]) -> Path:
    """Save one field as name.npy next to the run outputs"""
    data = field.data if isinstance(field, GridField) else np.asarray(field)
    path = Path(directory) / f"{name}.npy"
    np.save(path, data)
    return path


def dump_bundle(directory: Union[str, Path], field: CoefficientField, bundle: CorrectorBundle) -> Dict[str, Path]:
    """Mask, correctors, fluxes and sigma of a bundle as .npy arrays"""
    paths = {"matrix_mask": dump_field(directory, "matrix_mask", field.matrix_mask.astype(np.uint8))}
    for i, entry in enumerate(bundle.directions):
        paths[f"phi_{i}"] = dump_field(directory, f"phi_{i}", entry.phi)
        paths[f"phi_ext_{i}"] = dump_field(directory, f"phi_ext_{i}", entry.phi_ext)
        paths[f"flux_{i}"] = dump_field(directory, f"flux_{i}", entry.flux)
    for i, tensor in enumerate(bundle.sigma):
        paths[f"sigma_{i}"] = dump_field(directory, f"sigma_{i}", tensor)
    logger.info(f"Dumped {len(paths)} fields to {directory}")
    return paths
