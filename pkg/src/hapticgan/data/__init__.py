from hapticgan.data.importer import (
    ImportConfig,
    ImportConfigError,
    RawImportError,
    detect_contact,
    import_raw,
)
from hapticgan.data.records import (
    MATERIALS,
    MOTIONS,
    N_CLASSES,
    STREAMS,
    DatasetManifest,
    InteractionRecord,
    SensorStream,
    ValidationError,
)
from hapticgan.data.splits import (
    SplitError,
    SplitPlan,
    leave_one_object_out,
    stratified_kfold,
    subset_labeled_count,
    subset_labeled_fraction,
    unlabeled_subset,
)
from hapticgan.data.store import (
    CorruptStreamError,
    SchemaError,
    StoreError,
    load_store,
    save_store,
)

__all__ = [
    "MATERIALS", "MOTIONS", "N_CLASSES", "STREAMS", "CorruptStreamError", "DatasetManifest",
    "ImportConfig", "ImportConfigError", "InteractionRecord", "RawImportError", "SchemaError",
    "SensorStream", "SplitError", "SplitPlan", "StoreError", "ValidationError", "detect_contact",
    "import_raw", "leave_one_object_out", "load_store", "save_store", "stratified_kfold",
    "subset_labeled_count", "subset_labeled_fraction", "unlabeled_subset",
]
