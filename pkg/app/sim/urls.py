"""
Url mappings for sim app
"""

from django.urls import (
    path,
    include
)
from rest_framework.routers import DefaultRouter
from sim import views

router = DefaultRouter()
router.register('runs', views.SimulationRunViewSet)

app_name = 'sim'

urlpatterns = [
    path('', include(router.urls))
]
