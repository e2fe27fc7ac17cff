"""
WSGI config for the patch_attack project.

Used by ``manage.py serve_oracle_stub --http`` and any WSGI server hosting
the ``POST /oracle/classify/`` stub.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'patch_attack.settings')

application = get_wsgi_application()
