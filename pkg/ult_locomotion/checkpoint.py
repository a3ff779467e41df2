#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

ULTC checkpoint container.

Layout (little endian):

    b"ULTC" | version u32 | flags u32 | header length u32 | header JSON
    array count u32
    per array: name length u32 | name | rank u32 | dims u32 * rank | float32 data

flags bit 0 marks a deploy export. The header JSON carries the network
configuration and the model kind (ult, ult-deploy, oracle, optimizer).
Training state that is not a tensor lives next to the model file in
`<path>.state.npz`, optimizer moments in `<path>.optim.ultc`.
"""

import hashlib
import json
import os
import struct

import numpy as np
import torch

from . import log
from .errors import CheckpointError
from .network import NetConfig, OraclePolicy, ULTNet

logger = log.setup_custom_logger("ult_locomotion")

MAGIC = b"ULTC"
FORMAT_VERSION = 1
FLAG_DEPLOY = 1

# arrays belonging to the privilege-only path
PRIVILEGED_PREFIXES = (
    "privilege_encoder.",
    "privilege_pos_embedding",
    "teacher_head.",
    "teacher_log_std",
    "value_head.",
)


def optimizer_path(path):
    return path + ".optim.ultc"


def state_path(path):
    return path + ".state.npz"


def write_container(path, header, arrays, flags=0):
    """
    Write named float32 arrays with a JSON header.

    Arguments:
        path {str} -- output file
        header {dict} -- JSON-serializable metadata
        arrays {dict} -- name -> array (written in insertion order)
        flags {int} -- header flags
    """
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as out_f:
            out_f.write(MAGIC)
            out_f.write(struct.pack("<III", FORMAT_VERSION, flags, len(header_bytes)))
            out_f.write(header_bytes)
            out_f.write(struct.pack("<I", len(arrays)))
            for name, value in arrays.items():
                data = np.ascontiguousarray(value, dtype="<f4")
                name_bytes = name.encode("utf-8")
                out_f.write(struct.pack("<I", len(name_bytes)))
                out_f.write(name_bytes)
                out_f.write(struct.pack("<I", data.ndim))
                out_f.write(struct.pack("<{}I".format(data.ndim), *data.shape))
                out_f.write(data.tobytes())
    except OSError as e:
        raise CheckpointError("Could not write checkpoint {}: {}".format(path, e))


def _read_exact(in_f, count, path):
    data = in_f.read(count)
    if len(data) != count:
        raise CheckpointError("Truncated checkpoint: {}".format(path))
    return data


def read_container(path):
    """
    Read a container file.

    Returns:
        tuple -- (header dict, flags, arrays dict of float32 numpy arrays)
    """
    if not os.path.isfile(path):
        raise CheckpointError("No such checkpoint: {}".format(path))
    arrays = {}
    with open(path, "rb") as in_f:
        if _read_exact(in_f, 4, path) != MAGIC:
            raise CheckpointError("Not a ULTC checkpoint: {}".format(path))
        version, flags, header_length = struct.unpack("<III", _read_exact(in_f, 12, path))
        if version != FORMAT_VERSION:
            raise CheckpointError(
                "Unsupported checkpoint version {} in {}".format(version, path)
            )
        header = json.loads(_read_exact(in_f, header_length, path).decode("utf-8"))
        (count,) = struct.unpack("<I", _read_exact(in_f, 4, path))
        for _ in range(count):
            (name_length,) = struct.unpack("<I", _read_exact(in_f, 4, path))
            name = _read_exact(in_f, name_length, path).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(in_f, 4, path))
            dims = struct.unpack("<{}I".format(rank), _read_exact(in_f, 4 * rank, path))
            size = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(_read_exact(in_f, 4 * size, path), dtype="<f4")
            arrays[name] = data.reshape(dims).astype(np.float32)
    return header, flags, arrays


def model_arrays(model, exclude=()):
    arrays = {}
    for name, value in model.state_dict().items():
        if name.startswith(exclude):
            continue
        arrays[name] = value.detach().cpu().numpy()
    return arrays


def model_header(model, metadata=None):
    header = {"kind": model.kind, "net": model.config.as_dict(), "metadata": metadata or {}}
    if isinstance(model, OraclePolicy):
        header["oracle_hidden"] = model.hidden
        header["critic_hidden"] = model.critic_hidden
    return header


def save_model(model, path, metadata=None):
    write_container(path, model_header(model, metadata), model_arrays(model))
    logger.debug("Wrote {} checkpoint {}".format(model.kind, path))


def export_student(model, path, metadata=None):
    """
    Write a deploy-only checkpoint without the privilege encoder, teacher
    head and value head.
    """
    if not isinstance(model, ULTNet):
        raise CheckpointError("Only unified transformer models can be exported")
    header = model_header(model, metadata)
    header["kind"] = "ult-deploy"
    write_container(path, header, model_arrays(model, PRIVILEGED_PREFIXES), FLAG_DEPLOY)
    logger.info("Exported deployable student to {}".format(path))


def build_model(header, flags=0):
    net = NetConfig.from_dict(header["net"])
    kind = header.get("kind")
    if kind == "oracle":
        return OraclePolicy(net, header["oracle_hidden"], header["critic_hidden"])
    if kind == "ult-deploy" or flags & FLAG_DEPLOY:
        return ULTNet(net, deploy=True)
    if kind == "ult":
        return ULTNet(net)
    raise CheckpointError("Unknown checkpoint kind: {}".format(kind))


def load_model(path, expected_net=None):
    """
    Load a model checkpoint.

    Arguments:
        path {str} -- checkpoint file

    Keyword Arguments:
        expected_net {dict} -- net section the checkpoint must agree with (dims only)

    Returns:
        tuple -- (model, header)
    """
    header, flags, arrays = read_container(path)
    if expected_net is not None:
        for key in ["obs_dim", "action_dim", "privilege_dim", "window"]:
            if expected_net.get(key) != header["net"].get(key):
                raise CheckpointError(
                    "Checkpoint {} has {} = {}, configuration expects {}".format(
                        path, key, header["net"].get(key), expected_net.get(key)
                    )
                )
    model = build_model(header, flags)
    expected = model.state_dict()
    missing = [name for name in expected if name not in arrays]
    unexpected = [name for name in arrays if name not in expected]
    if missing or unexpected:
        raise CheckpointError(
            "Checkpoint {} does not match its model: missing {}, unexpected {}".format(
                path, missing, unexpected
            )
        )
    state = {
        name: torch.as_tensor(arrays[name]).to(expected[name].dtype).reshape(
            expected[name].shape
        )
        for name in expected
    }
    model.load_state_dict(state)
    model.eval()
    return model, header


def save_optimizer(optimizer, path):
    state = optimizer.state_dict()
    arrays = {}
    scalars = {}
    for pid, entries in state["state"].items():
        for key, value in entries.items():
            name = "{}.{}".format(pid, key)
            if torch.is_tensor(value) and value.dim() > 0:
                arrays[name] = value.detach().cpu().numpy()
            else:
                scalars[name] = float(value)
    header = {"kind": "optimizer", "param_groups": state["param_groups"], "scalars": scalars}
    write_container(path, header, arrays)


def load_optimizer(optimizer, path):
    header, _, arrays = read_container(path)
    if header.get("kind") != "optimizer":
        raise CheckpointError("{} holds no optimizer state".format(path))
    entries = {}
    for name, value in arrays.items():
        pid, key = name.split(".", 1)
        entries.setdefault(int(pid), {})[key] = torch.as_tensor(value)
    for name, value in header["scalars"].items():
        pid, key = name.split(".", 1)
        entries.setdefault(int(pid), {})[key] = torch.tensor(value, dtype=torch.float32)
    optimizer.load_state_dict({"state": entries, "param_groups": header["param_groups"]})


def save_training_state(path, arrays, meta):
    """
    Non-tensor training state: numpy arrays plus a JSON document
    (generator states, counters)
    """
    payload = dict(arrays)
    payload["__meta__"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as out_f:
        np.savez(out_f, **payload)


def load_training_state(path):
    if not os.path.isfile(path):
        raise CheckpointError("No training state next to checkpoint: {}".format(path))
    with np.load(path, allow_pickle=False) as data:
        arrays = {name: data[name] for name in data.files if name != "__meta__"}
        meta = json.loads(str(data["__meta__"]))
    return arrays, meta


def file_digest(path):
    """
    SHA-256 of a file, used to check that evaluation leaves checkpoints untouched
    """
    digest = hashlib.sha256()
    with open(path, "rb") as in_f:
        for chunk in iter(lambda: in_f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


if __name__ == "__main__":
    print("this is only a module")
