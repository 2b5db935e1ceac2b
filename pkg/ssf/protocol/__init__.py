"""Protocol objects, fork choice, finality gadget and validator logic."""
