"""Base error type for the workbench services."""


class WorkbenchError(Exception):
    """Raised when a numerical operation cannot honour its contract."""

    code = "workbench_error"

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self)}
