"""
Views for the simulation runs API
"""
from drf_spectacular.utils import (
    extend_schema_view,
    extend_schema,
    OpenApiParameter,
    OpenApiTypes
)

from rest_framework import (
    mixins,
    status,
    viewsets
)
from rest_framework.decorators import action
from rest_framework.response import Response
from rest_framework.authentication import TokenAuthentication
from rest_framework.permissions import IsAuthenticatedOrReadOnly

from core.models import SimulationRun
from sim import serializers
from sim.engine import run_batch
from sim.workload import WorkloadError


@extend_schema_view(
    list=extend_schema(
        parameters=[
            OpenApiParameter(
                'algorithm',
                OpenApiTypes.STR,
                description='Only runs of this algorithm'
            ),
            OpenApiParameter(
                'conflict_rate',
                OpenApiTypes.FLOAT,
                description='Only runs with this conflict rate'
            )
        ]
    ),
    create=extend_schema(
        request=serializers.SimConfigSerializer,
        responses=serializers.SimulationRunSerializer(many=True)
    )
)
class SimulationRunViewSet(mixins.ListModelMixin,
                           mixins.RetrieveModelMixin,
                           mixins.DestroyModelMixin,
                           viewsets.GenericViewSet):
    """Stored simulation runs; posting a config runs and stores a batch"""
    serializer_class = serializers.SimulationRunDetailSerializer
    queryset = SimulationRun.objects.all()
    authentication_classes = [TokenAuthentication]
    permission_classes = [IsAuthenticatedOrReadOnly]

    def get_queryset(self):
        algorithm = self.request.query_params.get('algorithm')
        conflict_rate = self.request.query_params.get('conflict_rate')
        queryset = self.queryset
        if algorithm:
            queryset = queryset.filter(algorithm=algorithm)
        if conflict_rate:
            try:
                queryset = queryset.filter(conflict_rate=float(conflict_rate))
            except ValueError:
                return queryset.none()
        return queryset

    def get_serializer_class(self):
        if self.action == 'list':
            return serializers.SimulationRunSerializer
        elif self.action == 'create':
            return serializers.SimConfigSerializer
        elif self.action == 'records':
            return serializers.OperationRecordSerializer
        return self.serializer_class

    def create(self, request):
        serializer = self.get_serializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        config = serializer.to_config()
        try:
            batch = run_batch(config)
        except WorkloadError as err:
            return Response(
                {'detail': str(err)},
                status=status.HTTP_400_BAD_REQUEST
            )
        runs = [
            SimulationRun.objects.create_from_metrics(metrics, config)
            for metrics in batch
        ]
        data = serializers.SimulationRunSerializer(runs, many=True).data
        return Response(data, status=status.HTTP_201_CREATED)

    @action(methods=['GET'], detail=True)
    def records(self, request, pk=None):
        run = self.get_object()
        serializer = self.get_serializer(run.records.all(), many=True)
        return Response(serializer.data, status=status.HTTP_200_OK)
