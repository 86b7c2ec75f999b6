"""Question templates for the six templated task types.

Slots are INSTRUCTION, OBJECT, LOCATION, ACTION, and MODE (key/dense).
The "Answer:" marker of the source table separates prompt from answer;
the answer side is what the model is trained to produce.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Template:
    id: str
    prompt_pattern: str
    answer_pattern: str

    def fill_prompt(self, **slots: str) -> str:
        return self.prompt_pattern.format(**slots)

    def fill_answer(self, **slots: str) -> str:
        return self.answer_pattern.format(**slots)


TEMPLATES = {
    t.id: t
    for t in (
        Template(
            "verification",
            "The initial scene is <scene></scene> and the current scene is <scene></scene>. "
            "Instruction: {INSTRUCTION}. Finished?",
            "{LABEL}",
        ),
        Template(
            "task_caption",
            "The initial scene is <scene></scene> and the final scene is <scene></scene>. "
            "Describe the task.",
            "{INSTRUCTION}",
        ),
        Template(
            "localization",
            "The scene is <scene></scene>. Locate: {OBJECT}.",
            "{LOCATION}",
        ),
        Template(
            "dense_caption",
            "The scene is <scene></scene>. What is located at {LOCATION}?",
            "{OBJECT}",
        ),
        Template(
            "goal_generation",
            "The initial scene is <scene></scene>. Instruction: {INSTRUCTION}. "
            "Generate the goal {MODALITY}.",
            "{GOAL}",
        ),
        Template(
            "action_prediction",
            "<scene></scene>. {INSTRUCTION}. Predict {MODE} actions.",
            "{ACTION}",
        ),
    )
}

MODALITY_NAMES = {"image": "image", "pcd": "point cloud"}
