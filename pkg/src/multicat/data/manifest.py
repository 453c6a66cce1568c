from dataclasses import dataclass, field
from importlib.resources import files
from io import StringIO
from logging import getLogger
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import pandas as pd

from multicat.file import TEXT_ENCODING, compute_sha256
from multicat.types import BUILTIN_MANIFEST_PREFIX

logger = getLogger(__name__)

MANIFEST_COLUMNS = ["category_name", "class_id", "display_name"]
COMMENT_CHAR = "#"


class ManifestError(ValueError):
    """Raised for manifests violating the schema or the manifest invariants."""


@dataclass(frozen=True)
class ClassEntry:
    """A class of the pool. The image lists are empty until the class is attached to an image folder pool."""

    class_id: str
    display_name: str = ""
    train_images: Tuple[str, ...] = field(default=(), repr=False)
    test_images: Tuple[str, ...] = field(default=(), repr=False)

    @property
    def has_images(self) -> bool:
        return bool(self.train_images) or bool(self.test_images)


@dataclass(frozen=True)
class Category:
    name: str
    classes: Tuple[ClassEntry, ...]


@dataclass(frozen=True)
class CategoryManifest:
    """Ordered categories, each listing its member classes."""

    categories: Tuple[Category, ...]

    def __post_init__(self):
        names = [category.name for category in self.categories]
        if len(set(names)) != len(names):
            raise ManifestError(f"Category names must be unique, got {names}")
        seen: Dict[str, str] = {}
        for category in self.categories:
            if not category.classes:
                raise ManifestError(f'Category "{category.name}" has no classes')
            for entry in category.classes:
                if entry.class_id in seen:
                    raise ManifestError(
                        f'Class "{entry.class_id}" appears in categories "{seen[entry.class_id]}" and "{category.name}"'
                    )
                seen[entry.class_id] = category.name

    @property
    def category_names(self) -> List[str]:
        return [category.name for category in self.categories]

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    @property
    def num_classes(self) -> int:
        return sum(len(category.classes) for category in self.categories)

    def iter_classes(self) -> Iterator[Tuple[int, ClassEntry]]:
        """Yield (category index, class entry) in manifest order."""
        for category_index, category in enumerate(self.categories):
            for entry in category.classes:
                yield category_index, entry

    def class_entries(self) -> List[ClassEntry]:
        return [entry for _, entry in self.iter_classes()]

    def category_of(self) -> List[int]:
        """Category index of every class, in manifest order."""
        return [category_index for category_index, _ in self.iter_classes()]

    def category_by_name(self, name: str) -> Category:
        for category in self.categories:
            if category.name == name:
                return category
        raise KeyError(name)


def load_manifest(path: Path) -> CategoryManifest:
    """Read a manifest: one record per class with (category_name, class_id, optional display_name).

    Records are comma separated UTF-8 text, one per line, `#` starts a comment. A record with an empty
    class_id declares a category without adding a class to it. Errors name the line in the file.
    """
    try:
        text = path.read_text(encoding=TEXT_ENCODING)
    except UnicodeDecodeError as error:
        raise ManifestError(f'Manifest "{path}" does not parse: {error}') from error

    line_numbers: List[int] = []
    record_lines: List[str] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        content = line.split(COMMENT_CHAR, 1)[0]
        if content.strip():
            line_numbers.append(line_number)
            record_lines.append(content)
    if not record_lines:
        raise ManifestError(f'Manifest "{path}" contains no records')

    # Enough columns for the widest line, so longer records surface as extra fields
    width = max(len(MANIFEST_COLUMNS), *(line.count(",") + 1 for line in record_lines))
    try:
        frame = pd.read_csv(
            StringIO("\n".join(record_lines)),
            header=None,
            names=list(range(width)),
            index_col=False,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=False,
        )
    except pd.errors.ParserError as error:
        raise ManifestError(f'Manifest "{path}" does not parse: {error}') from error
    if len(frame) != len(record_lines):
        raise ManifestError(f'Manifest "{path}" does not parse: quoted fields must not span lines')

    frame = frame.fillna("")
    for line_number, (_, extra) in zip(line_numbers, frame.iloc[:, len(MANIFEST_COLUMNS) :].iterrows()):
        if any(str(value).strip() for value in extra):
            raise ManifestError(
                f"{path}: line {line_number} has more than {len(MANIFEST_COLUMNS)} fields "
                f"({', '.join(MANIFEST_COLUMNS)})"
            )
    frame = frame.iloc[:, : len(MANIFEST_COLUMNS)].set_axis(MANIFEST_COLUMNS, axis=1)

    manifest = _build_manifest(path, frame, line_numbers)
    logger.debug(
        'Loaded manifest "%s" with %d categories and %d classes', path, manifest.num_categories, manifest.num_classes
    )
    return manifest


def _build_manifest(path: Path, frame: pd.DataFrame, line_numbers: Sequence[int]) -> CategoryManifest:
    grouped: Dict[str, List[ClassEntry]] = {}
    first_line: Dict[str, str] = {}
    for line_number, row in zip(line_numbers, frame.itertuples(index=False)):
        category_name = str(row.category_name).strip()
        class_id = str(row.class_id).strip()
        display_name = str(row.display_name).strip()
        if not category_name:
            raise ManifestError(f'{path}: line {line_number} has an empty category name (class "{class_id}")')
        classes = grouped.setdefault(category_name, [])
        if not class_id:
            continue
        if class_id in first_line:
            raise ManifestError(
                f'{path}: line {line_number}, category "{category_name}": duplicate class "{class_id}", '
                f"first listed in {first_line[class_id]}"
            )
        first_line[class_id] = f'line {line_number}, category "{category_name}"'
        classes.append(ClassEntry(class_id=class_id, display_name=display_name or class_id))

    for category_name, classes in grouped.items():
        if not classes:
            raise ManifestError(f'{path}: category "{category_name}" is empty')

    return CategoryManifest(
        categories=tuple(Category(name=name, classes=tuple(classes)) for name, classes in grouped.items())
    )


def write_manifest(manifest: CategoryManifest, path: Path) -> None:
    rows = [
        (manifest.categories[category_index].name, entry.class_id, entry.display_name)
        for category_index, entry in manifest.iter_classes()
    ]
    frame = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wt", encoding=TEXT_ENCODING) as io_wrapper:
        io_wrapper.write("# category_name,class_id,display_name\n")
        frame.to_csv(io_wrapper, header=False, index=False)


def manifest_from_mapping(mapping: Dict[str, Sequence[str]]) -> CategoryManifest:
    """Build a manifest from {category_name: [class_id, ...]}."""
    return CategoryManifest(
        categories=tuple(
            Category(name=name, classes=tuple(ClassEntry(class_id=class_id, display_name=class_id) for class_id in ids))
            for name, ids in mapping.items()
        )
    )


def builtin_manifest_path(name: str) -> Path:
    resource = files("multicat.data.resources").joinpath(f"{name}.csv")
    if not resource.is_file():
        raise ManifestError(f'There is no manifest named "{name}" shipped with multicat')
    return Path(str(resource))


def resolve_manifest_path(reference: str, base_dir: Optional[Path] = None) -> Path:
    """Resolve a manifest reference from a config: a file path or 'builtin:<name>'."""
    if reference.startswith(BUILTIN_MANIFEST_PREFIX):
        return builtin_manifest_path(reference.removeprefix(BUILTIN_MANIFEST_PREFIX))
    path = Path(reference)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if not path.is_file():
        raise ManifestError(f'Manifest file "{path}" does not exist')
    return path


def manifest_hash(path: Path) -> str:
    return compute_sha256(path)
