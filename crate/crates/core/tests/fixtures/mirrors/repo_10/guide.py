import autogen
from autogen import UserProxyAgent

guide = UserProxyAgent(
    name="guide",
    code_execution_config={"work_dir": "desk", "use_docker": False},
)
autogen.runtime_logging.start(logger_type="sqlite")
