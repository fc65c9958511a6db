"""
Report service checks: health, command runs, error mapping and rate limiting.

USAGE: python api_test.py
"""
from app import create_app
from extensions import limiter


def make_client():
    app = create_app({"TESTING": True, "RATELIMIT_ENABLED": True})
    limiter.reset()
    return app.test_client()


def test_health_and_commands():
    print("[+] Testing health and command listing...")
    client = make_client()
    health = client.get('/api/health')
    assert health.status_code == 200
    assert health.get_json()["status"] == "ok"
    names = client.get('/api/commands').get_json()["commands"]
    assert "fixed-points" in names and "onedim" in names and len(names) == 12
    print("[+] Health tests completed.")


def test_run_fixed_points():
    print("[+] Testing a fixed-points run over HTTP...")
    client = make_client()
    response = client.post('/api/run/fixed-points', json={"family": {"a": 2.0, "b": 0.3}})
    assert response.status_code == 200
    report = response.get_json()
    assert report["command"] == "fixed-points"
    assert report["passed"] is True
    assert abs(report["result"]["P"]["location"][0] - 0.55345) < 1e-4
    print("[+] Fixed-points run tests completed.")


def test_error_mapping():
    print("[+] Testing error responses...")
    client = make_client()
    bad = client.post('/api/run/fixed-points', json={"family": {"b": 1.5}})
    assert bad.status_code == 400
    body = bad.get_json()
    assert body["error"] == "ConfigError" and body["message"] == "invalid configuration"
    assert "b" in body["details"]["errors"]
    garbled = client.post('/api/run/fixed-points', data="not json", content_type="application/json")
    assert garbled.status_code == 400
    missing = client.post('/api/run/no-such-command', json={})
    assert missing.status_code == 404
    assert "fixed-points" in missing.get_json()["commands"]
    escaped = client.post('/api/run/lyapunov', json={"options": {"x": 10, "y": 0, "n": 1, "transient": 5}})
    assert escaped.status_code == 422
    assert escaped.get_json()["error"] == "OrbitEscapedError"
    print("[+] Error response tests completed.")


def test_run_rate_limit():
    print("[+] Testing the per-minute run limit...")
    client = make_client()
    codes = [client.post('/api/run/fixed-points', json={}).status_code for _ in range(11)]
    assert codes[:10] == [200] * 10
    assert codes[10] == 429
    assert client.post('/api/run/fixed-points', json={}).get_json()["error"] == "Rate limit exceeded"
    print("[+] Rate limit tests completed.")


def main():
    test_health_and_commands()
    print()
    test_run_fixed_points()
    print()
    test_error_mapping()
    print()
    test_run_rate_limit()

if __name__ == "__main__":
    main()
