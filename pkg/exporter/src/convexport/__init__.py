from .export import (
    SUPPORTED_MODELS,
    ExportError,
    collect_conv_weights,
    export,
    export_model,
    load_model,
    main,
    write_tensor_archive,
)

__all__ = [
    "SUPPORTED_MODELS",
    "ExportError",
    "collect_conv_weights",
    "export",
    "export_model",
    "load_model",
    "main",
    "write_tensor_archive",
]
