from flask import Blueprint, jsonify, request

from commands import COMMANDS, run_command
from errors import ConfigError
from extensions import VERSION, limiter
from forms import build_run_config

api = Blueprint('api', __name__, url_prefix='/api')


@api.route('/health')
def health():
    return jsonify({"status": "ok", "version": VERSION})


@api.route('/commands')
def commands():
    return jsonify({"commands": sorted(COMMANDS)})


@api.route('/run/<command>', methods=['POST'])
@limiter.limit("10 per minute")
def run(command):
    """Run one analysis; the body uses the JSON config-file schema."""
    if command not in COMMANDS:
        return jsonify({"error": "NotFound", "message": f"Unknown command '{command}'",
                        "commands": sorted(COMMANDS)}), 404
    raw = request.get_json(silent=True)
    if raw is None and request.data:
        raise ConfigError('request body is not valid JSON')
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError('request body must be a JSON object')
    cfg = build_run_config(command, raw or {})
    report, _, _ = run_command(cfg)
    return jsonify(report)
