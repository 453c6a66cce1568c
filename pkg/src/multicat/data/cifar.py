from logging import getLogger
from pathlib import Path

from PIL.Image import fromarray as from_array
from torchvision.datasets import CIFAR100

from multicat.data.manifest import CategoryManifest, ManifestError, builtin_manifest_path, load_manifest
from multicat.data.split import TEST_SIDE, TRAIN_SIDE

logger = getLogger(__name__)

CIFAR_MANIFEST_NAME = "cifar100_coarse"


def export_cifar100(download_root: Path, pool_root: Path, download: bool = True) -> CategoryManifest:
    """Write CIFAR-100 into an image folder pool, one directory per fine class name.

    Returns the shipped coarse manifest after checking that its class ids are the dataset's class names.
    """
    manifest = load_manifest(builtin_manifest_path(CIFAR_MANIFEST_NAME))
    for side, train in ((TRAIN_SIDE, True), (TEST_SIDE, False)):
        dataset = CIFAR100(root=str(download_root), train=train, download=download)
        unknown = {entry.class_id for entry in manifest.class_entries()} - set(dataset.classes)
        if unknown:
            raise ManifestError(f"Classes of the CIFAR-100 manifest missing from the dataset: {sorted(unknown)}")

        counters = [0] * len(dataset.classes)
        for pixels, target in zip(dataset.data, dataset.targets):
            class_dir = pool_root / side / dataset.classes[target]
            class_dir.mkdir(parents=True, exist_ok=True)
            from_array(pixels).save(class_dir / f"{counters[target]:05d}.png")
            counters[target] += 1
        logger.info("Exported %d %s images of CIFAR-100 to %s", len(dataset.data), side, pool_root)
    return manifest
