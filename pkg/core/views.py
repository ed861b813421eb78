from django_filters.rest_framework import DjangoFilterBackend
from drf_spectacular.utils import OpenApiParameter, OpenApiResponse, extend_schema
from rest_framework import filters, permissions, viewsets

from .models import ExperimentRun
from .serializers import ExperimentRunSerializer


class ExperimentRunViewSet(viewsets.ReadOnlyModelViewSet):
    """
    ViewSet for browsing recorded experiment runs.
    Runs are created by the management commands only; supports filtering
    by command, configuration hash and seed.
    """

    queryset = ExperimentRun.objects.all()
    serializer_class = ExperimentRunSerializer
    permission_classes = [permissions.AllowAny]
    filter_backends = [DjangoFilterBackend, filters.OrderingFilter]
    filterset_fields = ["command", "config_sha256", "seed"]
    ordering_fields = ["created_at", "command"]

    @extend_schema(
        tags=["runs"],
        summary="List experiment runs",
        description="Retrieves recorded runs, newest first.",
        responses={200: ExperimentRunSerializer(many=True)},
    )
    def list(self, request, *args, **kwargs):
        return super().list(request, *args, **kwargs)

    @extend_schema(
        tags=["runs"],
        summary="Retrieve experiment run",
        description="Retrieves the configuration and summary of one run.",
        parameters=[
            OpenApiParameter(name="id", type=int, location=OpenApiParameter.PATH, description="Run ID"),
        ],
        responses={
            200: ExperimentRunSerializer,
            404: OpenApiResponse(description="Run not found"),
        },
    )
    def retrieve(self, request, *args, **kwargs):
        return super().retrieve(request, *args, **kwargs)
