#pragma once

// Prompt templates for remote model backends. Placeholders are {NAME}.
// Bump kPromptVersion whenever a template's wording changes.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dreamer::prompts {

inline constexpr std::string_view kPromptVersion = "v1";

// Queries the world model for the post-action textual sketch.
inline constexpr std::string_view kWorldModel = R"(You are a world model for a mobile GUI. Predict the screen right after the action below is executed.

Task: {GOAL}

[Current Screen State (Text Description)]
{CURRENT_STATE}

[Action]
{ACTION}

Describe the post-action screen as a textual sketch with one element per line, in exactly this format:
label=<label>;text="<text>";bbox=[x1,y1,x2,y2]
Coordinates are integer pixels with the origin at the top-left corner. Escape " and \ inside text with a backslash.
Reply with the element lines only.

[Predicted Screen State (Text Description)]
)";

// Feeds the prediction tree back to the agent for action selection.
inline constexpr std::string_view kReasoner = R"(You are selecting the best action based on World Model prediction tree.

Task: {GOAL}

Current sub-task: {SUBTASK}

The World Model has built a PREDICTION TREE showing what will happen for each candidate action:
{TREE_TEXT}

Based on the CURRENT SCREEN (shown in the image) and this prediction tree, select the best action.

Consider:
1. Immediate effect (1st level prediction)
2. Long-term trajectory (2nd level predictions if available)
3. How well the predicted states align with what you see on the current screen and the task goal

Reply with ONLY:
<selection>
Action Number: [1-{N}]
Reason: [Your reasoning]
</selection>
)";

// Follow-up candidates from a predicted state (depth > 1).
inline constexpr std::string_view kActorFollowUp = R"(Based on a PREDICTED screen state (not a real screenshot), perform the next action to progress toward the task.

Task: {GOAL}
Current sub-task: {SUBTASK}
Previous action taken: {PARENT_ACTION}

[Predicted Screen State (Text Description)]
{PREDICTED_STATE}

Based on this predicted screen state, what would be the best next action?

Generate {K} different candidate actions in JSON format.
Each action should be one of:
- Click: {"action": "click", "coordinate": [x, y]}
- Type: {"action": "type", "text": "content"}
- Scroll: {"action": "scroll", "scroll_direction": "up/down/left/right", "coordinate": [x, y]}
- Wait: {"action": "wait"}

Reply with {K} actions, one per line:
)";

// Root candidates from the real screen, given as a textual sketch.
inline constexpr std::string_view kActorRoot = R"(Based on the CURRENT screen state, perform the next action to progress toward the task.

Task: {GOAL}
Current sub-task: {SUBTASK}
Action history: {HISTORY}

[Current Screen State (Text Description)]
{CURRENT_STATE}

Based on this screen state, what would be the best next action?

Generate {K} different candidate actions in JSON format.
Each action should be one of:
- Click: {"action": "click", "coordinate": [x, y]}
- Type: {"action": "type", "text": "content"}
- Scroll: {"action": "scroll", "scroll_direction": "up/down/left/right", "coordinate": [x, y]}
- Wait: {"action": "wait"}

Reply with {K} actions, one per line:
)";

// Replaces every {KEY} with its value. Unknown placeholders stay verbatim,
// so literal JSON braces in the templates survive.
inline std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string>>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    const auto key = tmpl.substr(open + 1, close - open - 1);
    out.append(tmpl.substr(pos, open - pos));
    bool replaced = false;
    for (const auto& [k, v] : values) {
      if (k == key) {
        out += v;
        replaced = true;
        break;
      }
    }
    if (!replaced) out.append(tmpl.substr(open, close - open + 1));
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace dreamer::prompts
