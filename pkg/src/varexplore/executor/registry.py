from __future__ import annotations

import threading

from ..errors import UnknownWorkflow
from .builtins import builtin_workflows
from .graph import WorkflowGraph


class WorkflowRegistry:
    """Name -> workflow graph; built-ins are preregistered."""

    def __init__(self, include_builtins: bool = True):
        self._lock = threading.Lock()
        self._graphs: dict[str, WorkflowGraph] = builtin_workflows() if include_builtins else {}

    def register(self, name: str, graph: WorkflowGraph) -> None:
        with self._lock:
            self._graphs[name] = graph

    def lookup(self, name: str) -> WorkflowGraph:
        try:
            return self._graphs[name]
        except KeyError:
            raise UnknownWorkflow(f"no workflow named {name!r}; known: {', '.join(sorted(self._graphs))}") from None

    def __contains__(self, name) -> bool:
        return name in self._graphs

    def names(self) -> list[str]:
        return sorted(self._graphs)


default_registry = WorkflowRegistry()


def register_workflow(name: str, graph: WorkflowGraph, registry: WorkflowRegistry | None = None) -> None:
    (registry or default_registry).register(name, graph)


def lookup(name: str, registry: WorkflowRegistry | None = None) -> WorkflowGraph:
    return (registry or default_registry).lookup(name)
