"""
Solver defaults that apply to every call made inside a ``with`` block.

Each asyncio task, thread and process gets a stack of its own, so concurrent
training runs never see each other's settings.
"""
from asyncio import current_task, Task
from dataclasses import dataclass
from multiprocessing import current_process
from multiprocessing.process import BaseProcess
from threading import current_thread, Thread
from types import EllipsisType
from typing import Optional, TYPE_CHECKING
if TYPE_CHECKING:
    from .linsolve import CgConfig

Context = tuple[Task | EllipsisType | None, Thread, BaseProcess]

_stacks: dict[Context, list["Settings"]] = {}
default_settings: Optional["Settings"] = None


def get_context() -> Context:
    """The (task, thread, process) triple that owns a settings stack.

    Outside an event loop the task slot holds ``...``, which keeps it apart
    from a loop that has no current task.
    """
    try:
        task = current_task()
    except RuntimeError:
        task = ...
    return task, current_thread(), current_process()


def push_settings(settings: "Settings"):
    """Activate ``settings`` on top of this context's stack."""
    _stacks.setdefault(get_context(), []).append(settings)


def pop_settings() -> "Settings":
    """Deactivate and return the innermost settings of this context."""
    context = get_context()
    stack = _stacks[context]
    popped = stack.pop()
    if not stack:
        # an emptied stack belongs to a finished context
        del _stacks[context]
    return popped


@dataclass(frozen=True)
class Settings:
    """Defaults used by solver calls that were not given explicit
    configuration.

    :ivar cg: The conjugate gradient configuration. ``None`` means the
        built-in :py:class:`~convexfm.linsolve.CgConfig` defaults.
    :ivar eigen_max_iters: The Lanczos iteration cap.
    """
    cg: Optional["CgConfig"] = None
    eigen_max_iters: int = 300

    def __enter__(self):
        push_settings(self)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        if pop_settings() is not self:
            raise RuntimeError("settings stack mismatch: blocks were exited "
                               "out of order")

    def make_default(self):
        """Use these settings outside any ``with`` block."""
        global default_settings
        default_settings = self


def current_settings() -> Settings:
    """Returns the innermost active settings of this context."""
    stack = _stacks.get(get_context())
    if stack:
        return stack[-1]
    if default_settings is not None:
        return default_settings
    return Settings()
