from autogen import ConversableAgent

gate = ConversableAgent(name="gate")
