"""
Command router module for the RPC fitter.
This module routes a command-line subcommand to the agent that handles it and maps the outcome to an exit code.
"""

import logging
from typing import Any, Callable, Dict

from agents.fit_agent import FitAgent
from agents.projection_agent import ProjectionAgent
from agents.sweep_agent import SweepAgent
from utils.config import FitterConfig
from utils.configuration_validator import ConfigurationValidator
from utils.errors import EXIT_OK, EXIT_UNEXPECTED, error_response

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)


class CommandRouter:
    """
    Routes subcommands to the fit, projection and sweep agents.
    """

    def __init__(self, config: FitterConfig):
        """
        Initialize the command router.

        Args:
            config: Fitter configuration
        """
        self.config = config
        self.validator = ConfigurationValidator(config.get_config())

        fit_agent = FitAgent(config)
        projection_agent = ProjectionAgent(config)
        sweep_agent = SweepAgent(config)
        self.handlers: Dict[str, Callable[[Dict[str, Any]], Dict[str, Any]]] = {
            "fit": fit_agent.fit,
            "evaluate": fit_agent.evaluate,
            "project": projection_agent.project,
            "localize": projection_agent.localize,
            "sweep": sweep_agent.sweep,
        }
        logger.debug(f"Command router initialized with commands: {', '.join(self.handlers)}")

    def route(self, command: str, parameters: Dict[str, Any]) -> Dict[str, Any]:
        """
        Validate the parameters and run the command.

        Args:
            command: Subcommand name
            parameters: Command parameters

        Returns:
            Response dictionary; failures carry the error name and exit code
        """
        logger.info(f"Routing command: {command}")
        try:
            self.validator.ensure_valid(command, parameters)
            return self.handlers[command](parameters)
        except Exception as e:
            logger.error(f"Error running {command}: {str(e)}")
            return error_response(e)

    @staticmethod
    def exit_code(response: Dict[str, Any]) -> int:
        """
        Exit code of a response dictionary.
        """
        if response.get("status") == "success":
            return EXIT_OK
        return int(response.get("exit_code", EXIT_UNEXPECTED))
