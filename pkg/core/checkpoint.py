"""Versioned checkpoint container: config profile, vocabulary and every named tensor."""

import logging
import pickle
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import torch
from pydantic import ValidationError

from common.errors import ConfigError
from common.schemas import ModelConfig
from core.model import RNNG
from core.vocabulary import Vocabulary

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def save_checkpoint(path: Path, model: RNNG, run_config: Optional[Dict[str, Any]] = None):
    payload = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.model_dump(mode="json"),
        "vocabulary": model.vocab.to_dict(),
        "run_config": run_config or {},
        "initialization": {"scheme": model.config.init_scheme, "forget_bias": model.config.forget_bias},
        "state_dict": model.state_dict(),
    }
    torch.save(payload, path)
    logger.info(f"Saved checkpoint to {path}")


def load_checkpoint(path: Path) -> Tuple[RNNG, Dict[str, Any]]:
    """Rebuild the model from its embedded config; tensor shapes must match it exactly."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError, EOFError, pickle.UnpicklingError) as e:
        raise ConfigError(f"Cannot load checkpoint {path}: {e}") from e
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"Checkpoint {path} has format version {version}; expected {FORMAT_VERSION}")

    try:
        config = ModelConfig.model_validate(payload["model_config"])
    except ValidationError as e:
        raise ConfigError(f"Checkpoint {path} has an invalid model config: {e}") from e
    vocab = Vocabulary.from_dict(payload["vocabulary"])
    model = RNNG(config, vocab)
    expected = model.state_dict()
    stored = payload["state_dict"]
    missing = sorted(set(expected) - set(stored))
    unexpected = sorted(set(stored) - set(expected))
    if missing or unexpected:
        raise ConfigError(f"Checkpoint tensors do not match config: missing {missing}, unexpected {unexpected}")
    for name, tensor in stored.items():
        if tuple(tensor.shape) != tuple(expected[name].shape):
            raise ConfigError(
                f"Tensor {name} has shape {tuple(tensor.shape)}, config implies {tuple(expected[name].shape)}"
            )
    model.load_state_dict(stored)
    model.eval()
    logger.info(f"Loaded {config.mode.value} checkpoint from {path}")
    return model, payload.get("run_config", {})
