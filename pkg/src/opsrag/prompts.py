"""Prompt templates: QA instruction wrapping, distillation, rewriting, judging.

All templates are plain format strings so rendered prompts are byte-stable.
Task labels: ``knowledge_acquisition`` questions get the customer-service
template; ``troubleshooting`` questions get the root-cause-analysis rubric.
"""

from __future__ import annotations

from .errors import TemplateMissing

TASK_KNOWLEDGE = "knowledge_acquisition"
TASK_TROUBLESHOOTING = "troubleshooting"
TASKS = (TASK_KNOWLEDGE, TASK_TROUBLESHOOTING)

SEP_MARKER = "<sep>"
UNK_MARKER = "<unk>"

# --- QA instruction templates ---------------------------------------------------

KNOWLEDGE_TEMPLATE = (
    "Assume you are a customer service representative, and you have received a "
    "question from a user or the operations team:\n"
    "Content: {question}\n"
    "Please answer the user's question concisely and professionally based on the "
    "following known information:\n"
    "{segments}"
)

TROUBLESHOOTING_TEMPLATE = (
    "Please conduct a root cause analysis of the sudden AIOPS event based on the "
    "error log below. The analysis should include: 1. Scenario, 2. Problem "
    "localization (including service, method name, function, keywords, event type, "
    "event level, impact scope), 3. Solution (including personnel involved and "
    "resolution plan).\n"
    "Content: {question}\n"
    "Below is a historical case:\n"
    "{segments}"
)

_QA_TEMPLATES = {
    TASK_KNOWLEDGE: KNOWLEDGE_TEMPLATE,
    TASK_TROUBLESHOOTING: TROUBLESHOOTING_TEMPLATE,
}


def qa_template(task: str) -> str:
    try:
        return _QA_TEMPLATES[task]
    except KeyError:
        raise TemplateMissing(f"no instruction template for task {task!r}") from None


def render_segments(texts: list[str]) -> str:
    return "\n".join(f"Segment {i}: {text}" for i, text in enumerate(texts))


# --- dataset construction prompts ------------------------------------------------

DISTILL_PROMPT = (
    "Assume you are the IT operation team member and you have some questions to "
    "inquire. Assume the following document can answer your question. What "
    "questions and corresponding answers can you post?\n\n"
    "Please post as many knowledge based questions as possible.\n"
    "Do not post the question without an answer.\n"
    "Answer should be complete and must be got from the document.\n"
    "Question with very long answer is allowed.\n"
    f"If you cannot find any question or cannot provide answer, please respond {UNK_MARKER}.\n"
    f"Use {SEP_MARKER} to connect each QA.\n"
    "Content: {content}"
)

REWRITE_PROMPT = (
    "Assume you are the IT operation team member. Please rewrite the following "
    "sentence without changing its meaning.\n\n"
    "Content: {content}"
)

# --- judge prompts ----------------------------------------------------------------

_JUDGE_JSON_SINGLE = (
    "After providing your explanation, you must rate the answer on a scale of 1 to 10 "
    'using the following JSON format:\n\n```json\n{\n  "rating": "1 to 10",\n'
    '  "explanation": "Your explanation"\n}\n```'
)

_JUDGE_JSON_PAIRWISE = (
    "After providing your explanation, please output your final verdict in the "
    'following JSON format:\n\n```json\n{\n  "verdict": "Can only be A or B or Tie",\n'
    '  "explanation": "Your explanation"\n}\n```'
)

SINGLE_SCORE_PROMPT_KNOWLEDGE = (
    "Please act as an impartial evaluator and assess the quality of an answer "
    "provided by an AI assistant to a user's question. We will provide a question, "
    "a corresponding reference answer, and the assistant's answer. Your evaluation "
    "should consider the correctness of the answer.\n\n"
    "Evaluation steps:\n\n"
    "1. Please compare the assistant's answer to the reference answer.\n"
    "2. Identify and correct any errors.\n"
    "3. Evaluate as objectively as possible, paying attention to factual errors in "
    "the assistant's answer that are not present in the reference answer.\n"
    "4. If the assistant does not address the content of the reference answer, it "
    "will be scored as 0.\n\n" + _JUDGE_JSON_SINGLE
)

SINGLE_SCORE_PROMPT_TROUBLESHOOTING = (
    "Please act as an impartial evaluator and assess the quality of an answer "
    "provided by an AI assistant to a user's question. We will provide a question, "
    "a corresponding reference answer, and the assistant's answer. Your evaluation "
    "should consider the correctness of the answer.\n\n"
    "Evaluation steps:\n\n"
    "1. Please compare the assistant's answer to the reference answer.\n"
    "2. Identify and correct any errors.\n"
    "3. Evaluate as objectively as possible, paying attention to factual errors in "
    "the assistant's answer that are not present in the reference answer.\n"
    "4. If the assistant does not address the content of the reference answer, it "
    "will be scored as 0.\n"
    "5. The reference answer includes 7 fields, each field is worth 1 point, with "
    "the solution field worth 4 points. For each field in the assistant's answer, "
    "please strictly score according to the field score. If the answer is inaccurate "
    "or incorrect for a field, no points should be awarded for that field.\n\n"
    + _JUDGE_JSON_SINGLE
)

PAIRWISE_PROMPT_KNOWLEDGE = (
    "Please act as an impartial evaluator and assess the quality of answers provided "
    "by two AI assistants to a user's question. Your evaluation should consider the "
    "correctness and helpfulness of the answers. You will be given a reference "
    "answer, Assistant A's answer, and Assistant B's answer. Your task is to "
    "determine which assistant's answer is better.\n\n"
    "Evaluation steps:\n\n"
    "1. Compare both assistants' answers to the reference answer.\n"
    "2. Identify and correct any errors in the assistants' answers.\n"
    "3. Avoid any positional bias, ensuring that the order of the answers does not "
    "influence your decision.\n"
    "4. Do not let the length of the answers affect your assessment.\n"
    "5. Please answer based on facts, expressing the required information for the "
    "question.\n"
    "6. Do not favor certain assistant names. Be as objective as possible.\n\n"
    + _JUDGE_JSON_PAIRWISE
)

PAIRWISE_PROMPT_TROUBLESHOOTING = (
    "Please act as an impartial evaluator and assess the quality of answers provided "
    "by two AI assistants to a user's question. Your evaluation should consider the "
    "correctness and helpfulness of the answers. You will be given a reference "
    "answer, Assistant A's answer, and Assistant B's answer. Your task is to "
    "determine which assistant's answer is better.\n\n"
    "Evaluation steps:\n\n"
    "1. Compare both assistants' answers to the reference answer.\n"
    "2. Identify and correct any errors in the assistants' answers.\n"
    "3. Avoid any positional bias, ensuring that the order of the answers does not "
    "influence your decision.\n"
    "4. Do not let the length of the answers affect your assessment.\n"
    "5. Please answer based on facts, expressing the required information for the "
    "question.\n"
    "6. Do not favor certain assistant names. Be as objective as possible.\n"
    "7. The reference answer includes 7 fields, each field is worth 1 point, with "
    "the solution field worth 4 points. Please strictly compare the answers of both "
    "assistants for each field and analyze them. Based on the field scores, "
    "determine which assistant's answer is better, or if it's a tie\n\n"
    + _JUDGE_JSON_PAIRWISE
)

_SINGLE_PROMPTS = {
    TASK_KNOWLEDGE: SINGLE_SCORE_PROMPT_KNOWLEDGE,
    TASK_TROUBLESHOOTING: SINGLE_SCORE_PROMPT_TROUBLESHOOTING,
}
_PAIRWISE_PROMPTS = {
    TASK_KNOWLEDGE: PAIRWISE_PROMPT_KNOWLEDGE,
    TASK_TROUBLESHOOTING: PAIRWISE_PROMPT_TROUBLESHOOTING,
}


def single_score_prompt(task: str) -> str:
    try:
        return _SINGLE_PROMPTS[task]
    except KeyError:
        raise TemplateMissing(f"no single-score judge prompt for task {task!r}") from None


def pairwise_prompt(task: str) -> str:
    try:
        return _PAIRWISE_PROMPTS[task]
    except KeyError:
        raise TemplateMissing(f"no pairwise judge prompt for task {task!r}") from None


def render_single_judge_input(task: str, question: str, reference: str, answer: str) -> str:
    return (
        f"{single_score_prompt(task)}\n\n"
        f"[Question]\n{question}\n\n"
        f"[Reference Answer]\n{reference}\n\n"
        f"[Assistant's Answer]\n{answer}"
    )


def render_pairwise_judge_input(
    task: str, question: str, reference: str, answer_a: str, answer_b: str
) -> str:
    return (
        f"{pairwise_prompt(task)}\n\n"
        f"[Question]\n{question}\n\n"
        f"[Reference Answer]\n{reference}\n\n"
        f"[Assistant A's Answer]\n{answer_a}\n\n"
        f"[Assistant B's Answer]\n{answer_b}"
    )
