def parse_pair(text):
    left, right = text.split(",", 1)
    return left.strip(), right.strip()
