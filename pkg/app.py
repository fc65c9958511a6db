import logging
import os

from flask import Flask, jsonify, request
from flask_limiter.errors import RateLimitExceeded

from errors import AnalysisError, ConfigError
from extensions import configure_logging, limiter
from models import to_jsonable
from routes import api

logger = logging.getLogger(__name__)


# Create Flask application
def create_app(config=None):
    app = Flask(__name__)
    app.config['RATELIMIT_ENABLED'] = os.environ.get('HYPBOUND_RATELIMIT_ENABLED', '1') != '0'
    if config:
        app.config.update(config)

    configure_logging()
    limiter.init_app(app)

    app.register_blueprint(api)

    @app.errorhandler(ConfigError)
    def handle_config_error(e):
        return jsonify(to_jsonable(e.to_dict())), 400

    @app.errorhandler(AnalysisError)
    def handle_analysis_error(e):
        logger.info("analysis failed on %s: %s", request.path, e.message)
        return jsonify(to_jsonable(e.to_dict())), 422

    # Register custom error handler for rate limiting
    @app.errorhandler(RateLimitExceeded)
    def handle_rate_limit_exceeded(e):
        return jsonify({"error": "Rate limit exceeded", "message": str(e.description)}), 429

    return app


if __name__ == '__main__':
    create_app().run(debug=os.environ.get('FLASK_DEBUG') == '1')
