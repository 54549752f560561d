from autogen import AssistantAgent

worker = AssistantAgent(name="worker", human_input_mode="NEVER")
