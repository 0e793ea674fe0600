"""imtriage: read-only triage of WhatsApp and Viber artifacts in Android
filesystem extractions, with SHA-256 chain-of-custody manifests and
deterministic examiner reports."""

__version__ = "0.1.0"
