"""
URL configuration for the patch_attack project.

Only the oracle stub is exposed over HTTP; attacks run as batch jobs
through management commands.
"""

from django.urls import path, include

urlpatterns = [
    # Hard-label oracle stub speaking the wire protocol (POST /classify)
    path('', include('oracle.urls', namespace='oracle')),
]
