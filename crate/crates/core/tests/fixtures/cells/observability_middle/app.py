import autogen
from autogen import AssistantAgent

worker = AssistantAgent(name="worker", human_input_mode="NEVER")
autogen.runtime_logging.start(logger_type="sqlite")
