"""Prompt templates for every pipeline stage.

Each template is a plain ``str.format`` string. Tag contracts (``<question>``,
``<relevance>`` etc.) are parsed by :func:`crosslens.gateway.extract_tagged`.
"""

PRELIMINARY_EVAL_PROMPT = """Role: Data Strategy Consultant
Global Goal: {global_goal}
Current Dataset Metadata (Schema & Stats):
{data_profile}

Task:
Based ONLY on the schema and statistics provided, evaluate the potential relevance of this dataset to the Global Goal. Identify if this data contains core KPIs, key dimensions, or is likely just background noise.

Output Format:
Please wrap your evaluation in the following tags:
<relevance>1-10</relevance>
<reasoning>A brief explanation</reasoning>
<priority>High/Medium/Low</priority>
"""

GET_QUESTIONS_TEMPLATE = """### Instruction:
Given the following context:
<context>{context}</context>
Given the following goal:
<goal>{goal}</goal>
Given the following schema:
<schema>{schema}</schema>

Instructions:
* Write a list of questions to be solved by the data scientists in your team to explore my data and reach my goal.
* Explore diverse aspects of the data, and ask questions that are relevant to my goal.
* You must ask the right questions to surface anything interesting (trends, anomalies, etc.)
* Make sure these can realistically be answered based on the data schema.
* The insights that your team will extract will be used to generate a report.
* Each question should only have one part, that is a single '?' at the end which only require a single answer.
* Do not number the questions.
* You can produce at most {max_questions} questions. Stop generation after that.
* Most importantly, each question must be enclosed within <question></question> tags. Refer to the example response below:

Example response:
<question>What is the average age of the customers?</question>
<question>What is the distribution of the customers based on their age?</question>

### Response:
"""

GENERATE_CODE_SINGLE_TEMPLATE = """**Goal:** {goal}
**Question:** "{question}"
**Dataset Schema:**
{schema}

**File Path:**
The dataset is located at `{database_path}`.

---
**CRITICAL INSTRUCTIONS FOR WRITING PYTHON CODE:**

1.  **File Reading**:
    - You MUST load the file at `{database_path}` using the appropriate pandas function **based on its file extension** (e.g., `pd.read_csv()`, `pd.read_json()`).
    - **If reading a CSV file**: You MUST handle encoding errors. Use a `try-except` block. First, try `encoding='utf-8'`. If it fails, try `encoding='gbk'` or `encoding='latin1'`.

2.  **CRITICAL: Column Names - USE EXACT NAMES FROM SCHEMA**:
    - **ALWAYS** use ONLY the exact column names shown in the schema above.
    - **BEFORE** accessing any column, verify it exists: `if 'column_name' in df.columns:`
    - If you need data from a nested structure (e.g., dict/JSON in a column), use `.apply()`.

3.  **CRITICAL: Date/Time Columns**:
    - If you see any columns that represent dates or times (e.g., 'date', 'timestamp'), you **MUST** convert them to datetime objects using `pd.to_datetime(df['column_name'], errors='coerce')`.
    - Use `insight.tools.safe_datetime_parse()` for robust date parsing if standard methods fail.

4.  **Code Quality & Data Types**:
    - Be mindful of data types. Use `insight.tools.safe_numeric_convert()` for converting mixed-type columns to numeric.

5.  **CRITICAL: Empty DataFrame Checks**:
    - After loading data, ALWAYS check if the DataFrame is empty, and check again after filtering operations.

6.  **Error Handling**:
    - Wrap critical operations in try-except blocks and handle KeyError, ValueError, and TypeError gracefully.

7.  **Output Generation**:
    - You **MUST** use the predefined functions from the `insight.tools` module to save all outputs.
    - Before creating any plot, call `setup()` from `insight.tools`.
    - Generate one simple plot and save it as a `.jpg` file.
    - For the plot, save a statistics summary to `stat.json`.
    - Save the X and Y axis data (max 50 points) to `x_axis.json` and `y_axis.json` respectively.
    - Each JSON file must have "name", "description", and "value" fields. Ensure content is less than 4500 characters.
    - Call `insight.tools.fix_fnames()` at the very end of the script.

8.  **Code Structure**:
    - Start your code block with ```python and end it with ```.
    - Do not produce any text outside of this single Python code block.

**Available Tools:**
{function_docs}

---
Now, write the Python code to answer the question.

```python
"""

CROSS_CODE_TEMPLATE = """**Goal:** {goal}
**Cross-Source Question:** "{question}"
**Dataset A Schema:**
{schema_a}
**Dataset B Schema:**
{schema_b}

**File Paths:**
Dataset A is located at `{path_a}`.
Dataset B is located at `{path_b}`.

---
**CRITICAL INSTRUCTIONS FOR WRITING PYTHON CODE:**

1.  Load BOTH files with the appropriate pandas reader for each extension, handling encoding fallbacks (`utf-8`, then `gbk`, then `latin1`) for CSV files.
2.  Use ONLY the exact column names shown in the schemas above; verify a column exists before accessing it.
3.  Convert date-like columns with `pd.to_datetime(..., errors='coerce')` before any date operation; `insight.tools.safe_datetime_parse()` is available for difficult formats.
4.  Answer the question by physically JOINING or COMPARING the two datasets (merges, aligned aggregations, statistical tests). Do not estimate numbers in prose.
5.  Check for empty DataFrames after loading and after every filter or merge.
6.  Use the predefined functions from the `insight.tools` module to save all outputs: call `setup()` before plotting, generate one simple plot as a `.jpg`, save a statistics summary to `stat.json`, save X and Y axis data (max 50 points) to `x_axis.json` and `y_axis.json`. Each JSON file must have "name", "description", and "value" fields and stay under 4500 characters. Call `insight.tools.fix_fnames()` at the very end.
7.  Start your code block with ```python and end it with ```. No text outside the code block.

**Available Tools:**
{function_docs}

---
Now, write the Python code to answer the question.

```python
"""

RETRY_TEMPLATE = """You failed.

Instructions:
-------------
{initial_prompt}
-------------

Completion:
-------------
{prev_output}
-------------

Above, the Completion did not satisfy the constraints given in the Instructions.
Error:
-------------
{error}
-------------

Please try again. Do not apologize. Please only respond with an answer that satisfies the constraints laid out in the Instructions:

"""

FOLLOW_UP_TEMPLATE = """Hi, I require the services of your team to help me reach my goal.

<context>{context}</context>

<goal>{goal}</goal>

<schema>{schema}</schema>

<question>{question}</question>

<answer>{answer}</answer>

Instructions:
* Produce a list of follow up questions explore my data and reach my goal.
* Note that we have already answered <question> and have the answer at <answer>, do not include a question similar to the one above.
* Explore diverse aspects of the data, and ask questions that are relevant to my goal.
* You must ask the right questions to surface anything interesting (trends, anomalies, etc.)
* Make sure these can realistically be answered based on the data schema.
* The insights that your team will extract will be used to generate a report.
* Each question that you produce must be enclosed in <question>content</question> tags.
* Each question should only have one part, that is a single '?' at the end which only require a single answer.
* Do not number the questions.
* You can produce at most {max_questions} questions.

"""

SELECT_A_QUESTION_TEMPLATE = """Hi, I require the services of your team to help me reach my goal.

<context>{context}</context>

<goal>{goal}</goal>

<prev_questions>{prev_questions_formatted}</prev_questions>

<followup_questions>{followup_questions_formatted}</followup_questions>

Instructions:
* Given a context and a goal, select one follow up question from the above list to explore after prev_question that will help me reach my goal.
* Do not select a question similar to the prev_questions above.
* Output only the index of the question in your response inside <question_id></question_id> tag.
* The output questions id must be 0-indexed.
"""

NODE_INSIGHT_TEMPLATE = """You are a data analyst summarizing one completed analysis step.

<goal>{goal}</goal>
<question>{question}</question>
<observation>{observation}</observation>

Instructions:
* State the single most important finding that answers the question, grounded in the observation's numbers.
* One or two sentences, no hedging, no preamble.
* Enclose the finding in <insight></insight> tags.
"""

SOURCE_SUMMARY_TEMPLATE = """You are a data analyst wrapping up the exploration of one data source.

<goal>{goal}</goal>
<source>{source_name}</source>
<findings>
{findings}
</findings>

Instructions:
* Write a concise summary (3-5 sentences) of what this source revealed with respect to the goal.
* Mention concrete numbers from the findings where available.
* Enclose the summary in <summary></summary> tags.
"""

TEXT_SUMMARY_TEMPLATE = """Compress the following document into a dense summary of at most {budget} characters. Preserve all concrete facts, figures, named entities, and dates. Output only the summary text.

<document>
{text}
</document>
"""

CLASSIFY_IMAGE_PROMPT = """Classify the attached image.

Answer with exactly one of: tabular (the image is dominated by a data table), visualization (the image is a chart, plot, or dashboard), other.

Output Format:
<image_kind>tabular/visualization/other</image_kind>
"""

EXTRACT_TABLE_PROMPT = """The attached image contains a data table. Transcribe it exactly.

Output Format:
Return a single JSON object with keys "headers" (list of column names) and "rows" (list of rows, each a list of cell values as strings). Every row must have exactly as many cells as there are headers. Output only the JSON object.
"""

DESCRIBE_CHART_PROMPT = """The attached image is a chart or visualization. Describe it for an analyst who cannot see it: chart type, axes, series, key values, and the main takeaway. Output only the description text.
"""

FORMAL_ANNOTATION_PROMPT = """Role: Chief Data Scientist
Global Goal: {global_goal}
Given the following schema:
<schema>{schema}</schema>
Exploration Summary from the Agent's Deep-Dive:
{exploration_summary}

Task:
Perform a final assessment of this data's importance to the global objective.
Metrics:
- Information Richness (1-10): How deep and high-quality are the insights found?
- Theme Alignment (1-10): How directly does this support the Global Goal?

Decision Criteria:
- "Primary": Contains core metrics; can drive the main analysis.
- "Secondary": Provides context, auxiliary dimensions, or validation.

Output Format:
<richness>1-10</richness>
<alignment>1-10</alignment>
<label>Primary/Secondary</label>
<justification>Detailed reason</justification>
"""

CROSS_QUESTION_PROMPT = """Role: Cross-domain Analyst
Dataset A (Your Data) Summary: {my_summary}
Dataset B (Target Data) Summary: {other_summary}
Your Label: {my_label}

Task:
Generate analytical questions that require JOINING or COMPARING both datasets to find hidden patterns.
Constraint:
- If your label is "Primary", generate 3 deep questions.
- If your label is "Secondary", generate 1 focused question.

Output Format:
Generate your questions, each enclosed in <question> tags.
Example: <question>Your question text (Rationale: ...)</question>
"""

ANNOTATION_PROMPT_TEMPLATE = """Role: Domain Expert & Critical Reviewer

You are: {annotator_name}
Your Domain Knowledge: {annotator_knowledge}
Your Data Schema: {annotator_schema}

You are reviewing analysis results from another agent.
Target Agent: {target_agent_name}
Target Agent's Analysis Insights: {target_insight}
Target Agent's Analysis Summary: {target_summary}

Task:
Provide critical comments or cross-domain insights based on your expertise.
Focus on:
1. Missing perspectives that your data might provide
2. Potential data quality issues
3. Alternative interpretations
4. Connections to broader business context

If you have no meaningful comments, respond with "no comment".
Otherwise, provide concise but insightful feedback.

Output Format:
<comment>Your critical feedback here</comment>
"""

FINAL_PROMPT_TEMPLATE = """Role: Senior Business Intelligence Analyst

Context from Complete Multi-Agent Analysis:
{full_context}

Task:
Synthesize all analyses, cross-dataset findings, and agent annotations into a comprehensive final report.

Your output should include:
1. Executive Summary (2-3 paragraphs)
2. Key Insights (bullet points, prioritized by importance)
3. Cross-dataset Discoveries
4. Limitations and Data Quality Notes
5. Recommended Next Steps

Format your response as a JSON object with the following structure:
{{
    "summary": "executive summary text here",
    "insights": ["insight 1", "insight 2", ...],
    "cross_dataset_discoveries": ["discovery 1", ...],
    "limitations": ["limitation 1", ...],
    "next_steps": ["recommendation 1", ...]
}}
"""

JUDGE_FACTUALITY_PROMPT = """Role: Meticulous Fact Checker

Ground-Truth Insights:
{ground_truth}

Predicted Report:
{report}

Task:
Assess the correctness of key entities and temporal trends in the predicted report against the ground truth, on a scale of 1-10. Numerical values are scored separately; focus on entities, directions of change, and time periods.

Output Format:
<score>1-10</score>
"""

JUDGE_LOGIC_PROMPT = """Role: Rigorous Analytical Reviewer

Ground-Truth Insights:
{ground_truth}

Predicted Report:
{report}

Task:
Evaluate the internal coherence and reasoning quality of the predicted report on a scale of 1-10, considering:
- Attribution: validity of causal relationships
- Trend Inference: evidence-based extrapolation
- Comparison: objectivity of analysis

Output Format:
<score>1-10</score>
"""

JUDGE_INSIGHT_PROMPT = """Role: Senior Analytics Editor

Predicted Report:
{report}

Task:
Rate the value-add of the report's insights on a scale of 1-10, considering non-triviality, actionability, and novelty.

Output Format:
<score>1-10</score>
"""
