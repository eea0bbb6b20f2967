from kuranishi_atlas.atlas_file import format_atlas
from kuranishi_atlas.demos import DEMOS


def test_list_demos(client):
    response = client.get("/api/atlas/demos")
    assert response.status_code == 200
    names = [demo["name"] for demo in response.json()["demos"]]
    assert names == list(DEMOS)


def test_unknown_demo(client):
    response = client.post("/api/atlas/demo/sphere")
    assert response.status_code == 404


def test_run_demo(client):
    response = client.post("/api/atlas/demo/zero-linear", json={"resolution": "1/32", "seeds": [0, 1]})
    assert response.status_code == 200
    data = response.json()
    assert data["success"] is True
    assert data["demo"]["atlas"] == "zero-linear"


def test_validate(client, zero_linear):
    response = client.post("/api/atlas/validate", json={"text": format_atlas(zero_linear), "resolution": "1/32"})
    assert response.status_code == 200
    data = response.json()
    assert data["atlas"] == "zero-linear"
    assert data["report"]["name"] == "validate"


def test_validate_bad_text(client):
    response = client.post("/api/atlas/validate", json={"text": "hello"})
    assert response.status_code == 400
    assert "line 1" in response.json()["detail"]


def test_validate_unknown_level(client, zero_linear):
    response = client.post("/api/atlas/validate", json={"text": format_atlas(zero_linear), "level": "extreme"})
    assert response.status_code == 400


def test_count(client, zero_linear):
    response = client.post("/api/atlas/count", json={"text": format_atlas(zero_linear), "resolution": "1/32"})
    assert response.status_code == 200
    data = response.json()
    assert data["total"] == 1
    assert data["classes"][0]["sign"] == "+1"


def test_count_needs_dimension_zero(client, zero_linear):
    text = format_atlas(zero_linear).replace("dim 0", "dim 1")
    response = client.post("/api/atlas/count", json={"text": text})
    assert response.status_code == 400
