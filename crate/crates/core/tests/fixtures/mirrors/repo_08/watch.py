from autogen import ConversableAgent, GroupChat, UserProxyAgent


def display_watch(chat):
    for message in chat.messages:
        print(message)


helmsman = ConversableAgent(
    name="helmsman",
    human_input_mode="TERMINATE",
    max_consecutive_auto_reply=5,
)
deckhand = UserProxyAgent(
    name="deckhand",
    human_input_mode="NEVER",
    max_consecutive_auto_reply=5,
    code_execution_config={"work_dir": "deck", "use_docker": False},
)
watch = GroupChat(agents=[helmsman, deckhand], messages=[], max_round=10)
display_watch(watch)
