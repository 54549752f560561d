from autogen import AssistantAgent, UserProxyAgent

assistant = AssistantAgent(
    name="builder",
    system_message="You write code for the user.",
    human_input_mode="NEVER",
    max_consecutive_auto_reply=8,
)
runner = UserProxyAgent(
    name="runner",
    human_input_mode="NEVER",
    max_consecutive_auto_reply=8,
    code_execution_config={"work_dir": "scratch", "use_docker": False},
)
