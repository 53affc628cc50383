from vnhodge.io.parsers import Problem, ProblemParser, SubdivisionParser
