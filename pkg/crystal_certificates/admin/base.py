from io import BytesIO
import zipfile

from django.contrib import admin, messages
from django.http import HttpResponse
from django.utils import timezone
from django.utils.html import format_html
import swapper

CertificateDefinition = swapper.load_model("crystal_certificates", "CertificateDefinition")
CertificateRun = swapper.load_model("crystal_certificates", "CertificateRun")


class CertificateDefinitionAdmin(admin.ModelAdmin):
    search_fields = ("name",)
    list_display = (
        "name",
        "command",
        "created",
        "modified",
    )
    list_filter = ("command",)

    @admin.action(description="Run selected certificate definitions")
    def run_selected(self, request, queryset):
        for definition in queryset:
            errors = definition.run_certificate(perm_user=request.user)
            if errors:
                self.message_user(
                    request,
                    f"{definition.name}: {'; '.join(errors)}",
                    level=messages.ERROR,
                )
            else:
                self.message_user(
                    request,
                    f"{definition.name}: certificate generated",
                    level=messages.SUCCESS,
                )

    actions = (run_selected,)


if not swapper.is_swapped("crystal_certificates", "CertificateDefinition"):
    admin.site.register(CertificateDefinition, CertificateDefinitionAdmin)


class CertificateRunAdmin(admin.ModelAdmin):
    autocomplete_fields = ("certificate_definition",)
    search_fields = ("certificate_definition__name",)

    readonly_fields = (
        "file_name",
        "certificate_definition",
        "passed",
        "created",
        "data",
    )

    list_display = (
        "file_name",
        "file_link",
        "certificate_definition",
        "passed",
        "created",
    )
    list_filter = ("passed",)

    ordering = ("-created",)

    @admin.display(description="File name")
    def file_name(self, obj):
        return obj.file.name.split("/")[-1]

    @admin.display(description="File link")
    def file_link(self, obj):
        return format_html(
            "<a href='{url}' target='_blank'>{text}</a>",
            url=obj.file.url,
            text="Download",
        )

    @admin.action(description="Download selected files as ZIP")
    def download_files_as_zip(self, request, queryset):
        buffer = BytesIO()

        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as zip_archive:
            for record in queryset:
                if not record.file:
                    continue
                try:
                    record.file.open()
                    # The stored name may include the upload path.
                    zip_archive.writestr(record.file.name.split("/")[-1], record.file.read())
                except Exception as e:
                    self.message_user(
                        request,
                        f"Failed to process file {record.file.name}: {e}",
                        level=messages.ERROR,
                    )
                finally:
                    record.file.close()

        buffer.seek(0)
        response = HttpResponse(buffer.getvalue(), content_type="application/zip")
        timestamp = timezone.now().strftime("%Y%m%d-%H%M%S")
        response["Content-Disposition"] = f"attachment; filename=certificates-{timestamp}.zip"
        return response

    actions = (download_files_as_zip,)


if not swapper.is_swapped("crystal_certificates", "CertificateRun"):
    admin.site.register(CertificateRun, CertificateRunAdmin)
