from autogen import AssistantAgent, GroupChat, UserProxyAgent


def display_transcript(chat):
    for message in chat.messages:
        print(message)


critic = AssistantAgent(
    name="critic",
    human_input_mode="NEVER",
    max_consecutive_auto_reply=1,
)
executor = UserProxyAgent(
    name="executor",
    human_input_mode="NEVER",
    max_consecutive_auto_reply=1,
    code_execution_config={"work_dir": "out", "use_docker": False},
)
review = GroupChat(agents=[critic, executor], messages=[], max_round=1)
display_transcript(review)
