"""discoverkit: OAI-PMH harvesting, endpoint diagnostics and discoverability reporting
for institutional repositories."""

__version__ = "0.1.0"

USER_AGENT = f"discoverkit/{__version__} (+https://github.com/discoverkit/discoverkit)"
