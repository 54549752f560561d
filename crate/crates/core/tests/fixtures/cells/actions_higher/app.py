from autogen import UserProxyAgent

runner = UserProxyAgent(name="runner", code_execution_config={"work_dir": "scratch"})
