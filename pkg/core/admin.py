from django.contrib import admin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ("id", "command", "config_sha256", "seed", "created_at")
    list_filter = ("command",)
    search_fields = ("config_sha256", "output_path")
    readonly_fields = ("config", "summary", "created_at")
    date_hierarchy = "created_at"
