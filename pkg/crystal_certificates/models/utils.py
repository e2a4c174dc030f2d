from django.conf import settings
from django.core.files.storage import storages


def get_storage():
    storage_key = getattr(settings, "CRYSTAL_CERTIFICATES_STORAGE_KEY", None)
    if storage_key:
        return storages[storage_key]

    # FileField rejects a storage callable returning None, so resolve the
    # default alias explicitly.
    return storages["default"]
