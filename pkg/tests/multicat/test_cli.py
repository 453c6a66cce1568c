import json
import sys

from pytest import mark, raises

from multicat.__main__ import command_line_interface
from multicat.data.manifest import load_manifest
from multicat.data.synthetic import TOY_MANIFEST_NAME
from multicat.exception import UserInputError
from multicat.experiments.store import RECORD_FILENAME, SPLITS_DIRNAME


def test_cli_sample(monkeypatch, path_toy_pool, path_work):
    config_path = path_work / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "preset": "toy",
                "dataset": {
                    "pool_root": str(path_toy_pool),
                    "train_per_class": 4,
                    "test_per_class": 2,
                    "scaling_sizes": [2],
                    "scaling_replicates": [1],
                },
            }
        )
    )
    out = path_work / "results"
    with monkeypatch.context() as context:
        mocked_cli_args = [sys.argv[0], "sample", "--config", str(config_path), "--out", str(out), "--seed", "7"]
        context.setattr(sys, "argv", mocked_cli_args)
        command_line_interface()

    (experiment_dir,) = list(out.iterdir())
    assert experiment_dir.name.startswith("sample-")
    assert (experiment_dir / RECORD_FILENAME).is_file()
    assert len(list((experiment_dir / SPLITS_DIRNAME).iterdir())) == 2


def test_cli_report_needs_an_experiment(monkeypatch, path_work):
    with monkeypatch.context() as context:
        context.setattr(sys, "argv", [sys.argv[0], "report", "--experiment", str(path_work)])
        with raises(UserInputError):
            command_line_interface()


@mark.slow
def test_cli_make_toy_pool(monkeypatch, path_work):
    pool_root = path_work / "toy"
    with monkeypatch.context() as context:
        context.setattr(sys, "argv", [sys.argv[0], "make-toy-pool", "--pool-root", str(pool_root), "--seed", "1"])
        command_line_interface()

    manifest = load_manifest(pool_root / TOY_MANIFEST_NAME)
    assert manifest.num_categories == 10
    assert manifest.num_classes == 100
