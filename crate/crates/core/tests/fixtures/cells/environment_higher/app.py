from autogen import UserProxyAgent

proxy = UserProxyAgent(
    name="proxy",
    code_execution_config={"work_dir": "jobs", "use_docker": False},
)
