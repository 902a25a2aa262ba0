"""ICD-10-CM model selection and training-data refinement toolkit."""

__version__ = "0.1.0"
