import torch
from pytest import raises

from multicat.labeling import LabelScheme
from multicat.model.checkpoint import CHECKPOINT_FILENAME, CheckpointError, load_checkpoint, save_checkpoint
from multicat.model.network import ForwardMode, build_network, forward
from multicat.types import ArchitectureSpec, LabelKind


def test_checkpoint_restores_the_network(path_work):
    scheme = LabelScheme(kind=LabelKind.CLASS_CATEGORY, num_classes=4, num_categories=2, category_of=(0, 0, 1, 1))
    network = build_network(ArchitectureSpec.tiny(output_width=scheme.width), seed=9)
    path = path_work / CHECKPOINT_FILENAME
    save_checkpoint(path, network, 9, scheme, epoch=3)

    checkpoint = load_checkpoint(path)
    assert checkpoint.seed == 9
    assert checkpoint.epoch == 3
    assert checkpoint.label_scheme == scheme
    assert checkpoint.network.spec == network.spec
    batch = torch.rand(2, 3, 16, 16)
    assert torch.equal(
        forward(checkpoint.network, batch, ForwardMode.EVAL), forward(network, batch, ForwardMode.EVAL)
    )


def test_checkpoint_errors(path_work):
    with raises(CheckpointError, match="does not exist"):
        load_checkpoint(path_work / "missing.pt")

    garbage = path_work / "garbage.pt"
    garbage.write_bytes(b"not a checkpoint")
    with raises(CheckpointError):
        load_checkpoint(garbage)

    foreign = path_work / "foreign.pt"
    torch.save({"state_dict": {}}, foreign)
    with raises(CheckpointError, match="format version"):
        load_checkpoint(foreign)


def test_label_scheme_must_fit_output_width(path_work):
    network = build_network(ArchitectureSpec.tiny(output_width=5), seed=0)
    scheme = LabelScheme(kind=LabelKind.CLASS_ONLY, num_classes=4)
    save_checkpoint(path_work / CHECKPOINT_FILENAME, network, 0, scheme, epoch=1)
    with raises(CheckpointError, match="Output width"):
        load_checkpoint(path_work / CHECKPOINT_FILENAME)
