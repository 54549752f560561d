from autogen import GroupChat

chat = GroupChat(agents=[], messages=[], max_round=1)
