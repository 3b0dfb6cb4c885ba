"""Protocol-v1 scorer server for masked-position logits."""

from .backends import PretrainedBackend, RequestError, TabularBackend
from .server import ServerConfig, handle_request, serve, serve_stream
from .tabular import TabularModel, TabularModelError

__version__ = "0.1.0"
