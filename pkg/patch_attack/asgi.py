"""
ASGI config for the patch_attack project.

Serves the oracle stub endpoint under an ASGI server.
"""

import os

from django.core.asgi import get_asgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'patch_attack.settings')

application = get_asgi_application()
