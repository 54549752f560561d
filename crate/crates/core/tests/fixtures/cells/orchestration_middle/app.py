from autogen import AssistantAgent

scribe = AssistantAgent(name="scribe", max_consecutive_auto_reply=5)
