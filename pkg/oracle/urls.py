"""
Oracle App - URLs
"""

from django.urls import path
from . import views

app_name = 'oracle'

urlpatterns = [
    path('classify', views.ClassifyView.as_view(), name='classify'),
]
