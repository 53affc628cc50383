from .json_parsers import Problem, ProblemParser, SubdivisionParser
