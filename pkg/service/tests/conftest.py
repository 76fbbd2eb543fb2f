import base64
import io

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from cmservice import HashBackend, create_app

DIM = 256
MAX_BATCH = 8


@pytest.fixture()
def client():
    app = create_app(HashBackend(dim=DIM), max_batch=MAX_BATCH)
    with TestClient(app) as c:
        yield c


def png_b64(width=4, height=4, color=(200, 30, 30)) -> str:
    image = Image.new("RGB", (width, height), color)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")
