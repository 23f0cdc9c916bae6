"""Teacher-student navigation with student-to-teacher advantage feedback."""

__version__ = "0.1.0"
