"""Dataset assembly: phantom plan, stratified split, folds and expanded test groups.

Directory layout under the dataset root:

    manifest.csv
    dataset_info.json
    images/<class>/<sample_id>.pgm
    images/test_groups/<group>/<sample_id>.pgm   (groups B-D)
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from src.augment.pipeline import degrade_for_group
from src.augment.rng import RngStream, stream_key
from src.errors import ArtifactError, InvalidInputError
from src.formats.artifacts import read_json, require, write_json
from src.formats.pgm import read_pgm, write_pgm
from src.formats.tables import read_manifest, write_manifest
from src.models.schemas import (
    CLASS_ORDER,
    DatasetManifest,
    PhantomSpec,
    SampleRecord,
    Split,
    TestGroup,
    TextureClass,
)

from .render import REFERENCE_SIZE, render_phantom

logger = logging.getLogger(__name__)

GEOMETRY_VARIANTS = 10
MATERIAL_LEVELS = 4
ANGLED_VARIANTS_PER_CLASS = 5
# 45-degree samples kept per class so totals reach 57/57/55/60
ANGLED_COUNTS = {
    TextureClass.ASTEROID: 17,
    TextureClass.GYRUS: 17,
    TextureClass.OVAL: 15,
    TextureClass.ROUND: 20,
}
MANIFEST_NAME = "manifest.csv"
INFO_NAME = "dataset_info.json"


def phantom_seed(root_seed: int, texture_class: TextureClass, geometry_variant: int) -> int:
    """Layout seed shared by every material level and angle of one geometry."""
    return stream_key(root_seed, "phantom", texture_class.value, geometry_variant)


def plan_phantoms(root_seed: int) -> list[PhantomSpec]:
    """All 0-degree phantoms plus the seeded selection of 45-degree ones."""
    specs = []
    for cls in CLASS_ORDER:
        def spec(j: int, k: int, angle: int) -> PhantomSpec:
            return PhantomSpec(
                texture_class=cls,
                geometry_variant=j,
                material_level=k,
                contact_angle=angle,
                seed=phantom_seed(root_seed, cls, j),
            )

        for j in range(1, GEOMETRY_VARIANTS + 1):
            for k in range(1, MATERIAL_LEVELS + 1):
                specs.append(spec(j, k, 0))

        rng = RngStream(root_seed, f"angled/{cls.value}").generator
        picked = rng.choice(GEOMETRY_VARIANTS, ANGLED_VARIANTS_PER_CLASS, replace=False)
        variants = sorted(int(v) + 1 for v in picked)
        candidates = [(j, k) for j in variants for k in range(1, MATERIAL_LEVELS + 1)]
        keep = sorted(rng.permutation(len(candidates))[:ANGLED_COUNTS[cls]])
        specs.extend(spec(*candidates[i], 45) for i in keep)
    return sorted(specs, key=lambda s: s.key)


def image_path(spec: PhantomSpec) -> str:
    return f"images/{spec.texture_class.value}/{spec.key}.pgm"


def group_image_path(group: TestGroup, source_id: str) -> str:
    return f"images/test_groups/{group.value}/{source_id}.pgm"


def _apportion(total: int, weights: list[int]) -> list[int]:
    """Largest-remainder apportionment; remainder ties go to the earlier entry."""
    whole = sum(weights)
    quotas = [total * w / whole for w in weights]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def stratified_split(
    manifest: DatasetManifest, test_fraction: float = 0.2, seed: int = 0
) -> DatasetManifest:
    """Assign train/test within each class by a seeded shuffle.

    The test total is the sum of per-class ceil(test_fraction * count); it is
    then spread over classes by largest remainder so the split stays
    proportional overall.
    """
    if not 0 < test_fraction < 1:
        raise InvalidInputError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    base = sorted(manifest.base_samples(), key=lambda s: s.sample_id)
    by_class = {cls: [s for s in base if s.spec.texture_class == cls] for cls in CLASS_ORDER}
    sizes = [len(by_class[cls]) for cls in CLASS_ORDER]
    total = sum(math.ceil(test_fraction * n - 1e-9) for n in sizes)
    test_counts = _apportion(total, sizes)

    assigned = []
    for cls, n_test in zip(CLASS_ORDER, test_counts):
        members = by_class[cls]
        order = RngStream(seed, f"split/{cls.value}").permutation(len(members))
        test_ids = {members[i].sample_id for i in order[:n_test]}
        for s in members:
            split = Split.TEST if s.sample_id in test_ids else Split.TRAIN
            assigned.append(s.model_copy(update={"split": split, "fold": None, "group": None}))
    return DatasetManifest(samples=sorted(assigned, key=lambda s: s.sample_id))


def kfold(manifest: DatasetManifest, folds: int = 5, seed: int = 0) -> DatasetManifest:
    """Stratified fold assignment over the train split.

    Each class is shuffled, the shuffled lists are concatenated in class order
    and position i goes to fold i mod `folds`, so per-class fold sizes differ
    by at most one and overall fold sizes by at most one.
    """
    if folds < 2:
        raise InvalidInputError(f"folds must be >= 2, got {folds}")
    train = sorted(manifest.train(), key=lambda s: s.sample_id)
    if not train:
        raise InvalidInputError("kfold needs a train split; run stratified_split first")

    fold_of: dict[str, int] = {}
    position = 0
    for cls in CLASS_ORDER:
        members = [s for s in train if s.spec.texture_class == cls]
        order = RngStream(seed, f"fold/{cls.value}").permutation(len(members))
        for i in order:
            fold_of[members[i].sample_id] = position % folds
            position += 1

    samples = [
        s.model_copy(update={"fold": fold_of.get(s.sample_id)}) for s in manifest.samples
    ]
    return DatasetManifest(samples=samples)


def build_test_groups(
    manifest: DatasetManifest,
    root: str | Path,
    blur_cap: float = 32.0,
    noise_cap: float = 30.0,
    seed: int = 0,
) -> DatasetManifest:
    """Tag test samples as group A and write blurred/noisy/both copies as B/C/D.

    Sigmas are drawn per sample and group, uniformly in [1, cap]; in group D the
    blur and noise sigmas are drawn independently and blur is applied first.
    """
    if blur_cap < 1 or noise_cap < 1:
        raise InvalidInputError("test-group sigma caps must be >= 1")
    root = Path(root)
    test = sorted(manifest.test(), key=lambda s: s.sample_id)
    if not test:
        raise InvalidInputError("no test split; run stratified_split first")

    samples = [s for s in manifest.samples if s.sample_id == s.source_id]
    samples = [
        s.model_copy(update={"group": TestGroup.CLEAN}) if s.split == Split.TEST else s
        for s in samples
    ]
    for record in test:
        clean = read_pgm(root / record.path)
        for group in (TestGroup.BLUR, TestGroup.NOISE, TestGroup.BLUR_NOISE):
            rng = RngStream(seed, f"groups/{record.sample_id}/{group.value}")
            img, blur_sigma, noise_sigma = degrade_for_group(clean, group, rng, blur_cap, noise_cap)
            path = group_image_path(group, record.sample_id)
            write_pgm(img, root / path)
            samples.append(record.model_copy(update={
                "sample_id": f"{record.sample_id}-{group.value}",
                "path": path,
                "group": group,
                "blur_sigma": blur_sigma,
                "noise_sigma": noise_sigma,
            }))
    return DatasetManifest(samples=sorted(samples, key=lambda s: s.sample_id))


def build_dataset(
    root_seed: int,
    output_dir: str | Path,
    size: int = REFERENCE_SIZE,
    workers: int = 1,
    test_fraction: float = 0.2,
    folds: int = 5,
    blur_cap: float = 32.0,
    noise_cap: float = 30.0,
) -> DatasetManifest:
    """Render every phantom, assign split, folds and groups, write the manifest."""
    root = Path(output_dir)
    specs = plan_phantoms(root_seed)

    def render(spec: PhantomSpec) -> SampleRecord:
        path = image_path(spec)
        write_pgm(render_phantom(spec, size), root / path)
        return SampleRecord(sample_id=spec.key, spec=spec, path=path)

    logger.info("rendering %d phantoms at %dpx with %d worker(s)", len(specs), size, workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(render, specs))
    else:
        records = [render(s) for s in specs]

    manifest = DatasetManifest(samples=records)
    manifest = stratified_split(manifest, test_fraction, stream_key(root_seed, "split"))
    manifest = kfold(manifest, folds, stream_key(root_seed, "folds"))
    manifest = build_test_groups(
        manifest, root, blur_cap, noise_cap, stream_key(root_seed, "test_groups")
    )

    write_manifest(manifest, root / MANIFEST_NAME)
    write_json(
        {"format_version": 1, "root_seed": root_seed, "image_size": size, "folds": folds},
        root / INFO_NAME,
    )
    return manifest


def load_dataset(root: str | Path) -> DatasetManifest:
    """Read a generated dataset, restoring phantom seeds from dataset_info.json."""
    root = Path(root)
    manifest = read_manifest(require(root / MANIFEST_NAME, "gen"))
    info = read_json(require(root / INFO_NAME, "gen"))
    try:
        root_seed = int(info["root_seed"])
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f"{root / INFO_NAME}: missing root_seed") from e
    samples = []
    for s in manifest.samples:
        seed = phantom_seed(root_seed, s.spec.texture_class, s.spec.geometry_variant)
        samples.append(s.model_copy(update={"spec": s.spec.model_copy(update={"seed": seed})}))
    return DatasetManifest(samples=samples)
