# Utils package for the RIS-aided THz link simulator
