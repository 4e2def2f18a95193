"""
Django admin customisation
"""

from django.contrib import admin
from django.utils.translation import gettext_lazy as _

from core import models


class OperationRecordInline(admin.TabularInline):
    model = models.OperationRecord
    extra = 0
    can_delete = False
    readonly_fields = [
        'op_id', 'origin', 'kind', 'mtype', 'submit_ms', 'ack_ms',
        'stable_ms', 'status',
    ]
    fields = readonly_fields
    show_change_link = False

    def has_add_permission(self, request, obj=None):
        return False


class SimulationRunAdmin(admin.ModelAdmin):
    ordering = ['-created']
    list_display = (
        'id', 'algorithm', 'run', 'latency_preset', 'conflict_rate',
        'mean_resp_ms', 'mean_stab_ms', 'aborts', 'converged'
    )
    list_filter = ('algorithm', 'latency_preset', 'converged')
    fieldsets = (
        (None, {'fields': ('algorithm', 'run', 'seed', 'config')}),
        (
            _('Response and stabilization'),
            {
                'fields': (
                    'mean_resp_ms',
                    'median_resp_ms',
                    'p99_resp_ms',
                    'mean_stab_ms',
                    'median_stab_ms',
                )
            }
        ),
        (
            _('Safety'),
            {'fields': ('aborts', 'invariant_violations', 'converged')}
        ),
        (_('Overhead'), {'fields': ('bytes_per_op',)}),
    )
    readonly_fields = ['created']
    inlines = [OperationRecordInline]


class OperationRecordAdmin(admin.ModelAdmin):
    ordering = ['simulation', 'id']
    list_display = ('op_id', 'simulation', 'kind', 'mtype', 'status')
    list_filter = ('kind', 'status')


admin.site.register(models.SimulationRun, SimulationRunAdmin)
admin.site.register(models.OperationRecord, OperationRecordAdmin)
