"""
OpenLineage audit trail for toolkit runs.

Each CLI command can be reported as an OpenLineage job run: the ``.msg``
specification is the input dataset and the produced artifact (machines,
report) the output dataset. Emission is best effort; a failing backend is
logged and never changes the outcome of the command.
"""

import logging
import uuid
from datetime import datetime, timezone
from typing import Dict, List, Optional

from openlineage.client import OpenLineageClient
from openlineage.client.facet import (
    DocumentationDatasetFacet,
    SchemaDatasetFacet,
    SchemaField,
)
from openlineage.client.run import (
    Dataset,
    InputDataset,
    Job,
    OutputDataset,
    Run,
    RunEvent,
    RunState,
)
from openlineage.client.transport.http import HttpConfig, HttpTransport

from msgsynth.spec_parser import MsgSpec

logger = logging.getLogger(__name__)

PRODUCER = "https://github.com/OpenLineage/OpenLineage/tree/main/integration/python"


def spec_dataset(spec: MsgSpec) -> Dict:
    """Dataset description of a specification: one schema field per bMSC."""
    fields = [
        {
            "name": name,
            "type": "bmsc",
            "description": f"{len(chart.messages)} messages over "
            f"{', '.join(sorted(chart.processes))}",
        }
        for name, chart in sorted(spec.bmscs.items())
    ]
    fields.append(
        {
            "name": spec.graph.name,
            "type": "msg",
            "description": f"{len(spec.graph.nodes)} nodes, "
            f"{len(spec.graph.edges)} edges",
        }
    )
    return {
        "name": spec.source,
        "description": f"MSG specification {spec.graph.name}",
        "schema": fields,
    }


class RunAuditEmitter:
    """Emits START / COMPLETE / FAIL events for toolkit commands."""

    def __init__(self, url: str, namespace: str = "msg-synthesis"):
        self.url = url
        self.namespace = namespace
        transport = HttpTransport(HttpConfig(url=url))
        self.client = OpenLineageClient(transport=transport)
        logger.info(f"Initialized RunAuditEmitter with lineage URL: {self.url}")

    def new_run_id(self) -> str:
        return str(uuid.uuid4())

    def emit_start(
        self, job_name: str, run_id: str, inputs: Optional[List[Dict]] = None
    ) -> None:
        self._emit(RunState.START, job_name, run_id, inputs, None)

    def emit_complete(
        self,
        job_name: str,
        run_id: str,
        inputs: Optional[List[Dict]] = None,
        outputs: Optional[List[Dict]] = None,
    ) -> None:
        self._emit(RunState.COMPLETE, job_name, run_id, inputs, outputs)

    def emit_fail(self, job_name: str, run_id: str, error_message: str) -> None:
        self._emit(RunState.FAIL, job_name, run_id, None, None)
        logger.info(f"Reported failure of {job_name}: {error_message}")

    def _emit(
        self,
        state: RunState,
        job_name: str,
        run_id: str,
        inputs: Optional[List[Dict]],
        outputs: Optional[List[Dict]],
    ) -> None:
        event = RunEvent(
            eventType=state,
            eventTime=datetime.now(timezone.utc).isoformat(),
            run=Run(runId=run_id),
            job=Job(namespace=self.namespace, name=job_name, facets={}),
            inputs=[
                InputDataset(namespace=d.namespace, name=d.name, facets=d.facets)
                for d in self._datasets(inputs)
            ],
            outputs=[
                OutputDataset(namespace=d.namespace, name=d.name, facets=d.facets)
                for d in self._datasets(outputs)
            ],
            producer=PRODUCER,
        )
        try:
            self.client.emit(event)
        except Exception as e:
            logger.warning(f"Could not emit {state.value} event for {job_name}: {e}")
            return
        logger.info(f"Emitted {state.value} event for {job_name} (run_id: {run_id})")

    def _datasets(self, infos: Optional[List[Dict]]) -> List[Dataset]:
        return [
            self._create_dataset(
                name=info["name"],
                description=info.get("description"),
                schema=info.get("schema"),
            )
            for info in infos or []
        ]

    def _create_dataset(
        self,
        name: str,
        description: Optional[str] = None,
        schema: Optional[List[Dict]] = None,
    ) -> Dataset:
        """Create a dataset with documentation and schema facets."""
        facets = {}
        if schema:
            facets["schema"] = SchemaDatasetFacet(
                fields=[
                    SchemaField(
                        name=field["name"],
                        type=field["type"],
                        description=field.get("description"),
                    )
                    for field in schema
                ]
            )
        if description:
            facets["documentation"] = DocumentationDatasetFacet(description=description)
        return Dataset(namespace=self.namespace, name=name, facets=facets)
